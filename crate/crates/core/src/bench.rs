//! Seeded synthetic regression benchmarks.
//!
//! * `sinusoid`: `y = sin(2π·phase) + 0.2·v2 + ε` with a cyclic `phase`.
//! * `piecewise`: a tent in `v1` whose `v2` slope flips sign at `v1 = 0.5`;
//!   linear on each half, nonlinear globally.
//! * `linear`: a daily cycle in `hour` and a narrow bump in `v_nl`, plus a
//!   strong globally linear term `2·v_lin`. Dropping `v_lin` (and retraining
//!   the base model) leaves only locally structured features.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::schema::{Dataset, FeatureSchema, Instance};

/// Standard deviation of the additive target noise.
pub const NOISE_STD: f64 = 0.05;

/// Name of the globally linear feature in the `linear` benchmark.
pub const LINEAR_FEATURE: &str = "v_lin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Sinusoid,
    Piecewise,
    Linear,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Sinusoid, Benchmark::Piecewise, Benchmark::Linear];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Sinusoid => "sinusoid",
            Benchmark::Piecewise => "piecewise",
            Benchmark::Linear => "linear",
        }
    }

    pub fn generate(&self, rows: usize, seed: u64) -> Result<Dataset> {
        match self {
            Benchmark::Sinusoid => sinusoid(rows, seed),
            Benchmark::Piecewise => piecewise(rows, seed),
            Benchmark::Linear => linear(rows, seed),
        }
    }
}

impl core::str::FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown benchmark `{s}`")))
    }
}

fn generate_rows(
    rows: usize,
    seed: u64,
    mut row: impl FnMut(&mut rng::StreamRng) -> (Vec<f64>, f64),
) -> (Vec<Instance>, Vec<f64>) {
    (0..rows)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let (values, y) = row(&mut r);
            (Instance::new(values), y)
        })
        .unzip()
}

fn noise(r: &mut rng::StreamRng) -> f64 {
    NOISE_STD * r.sample::<f64, _>(StandardNormal)
}

pub fn sinusoid(rows: usize, seed: u64) -> Result<Dataset> {
    let schema = alloc::vec![
        FeatureSchema::cyclic("phase", 1.0)?,
        FeatureSchema::continuous("v2", 0.0, 1.0)?,
    ];
    let (instances, targets) = generate_rows(rows, seed, |r| {
        let phase: f64 = r.random();
        let v2: f64 = r.random();
        let y = libm::sin(2.0 * PI * phase) + 0.2 * v2 + noise(r);
        (alloc::vec![phase, v2], y)
    });
    Dataset::new(schema, instances, targets)
}

pub fn piecewise(rows: usize, seed: u64) -> Result<Dataset> {
    let schema = alloc::vec![
        FeatureSchema::continuous("v1", 0.0, 1.0)?,
        FeatureSchema::continuous("v2", 0.0, 1.0)?,
    ];
    let (instances, targets) = generate_rows(rows, seed, |r| {
        let v1: f64 = r.random();
        let v2: f64 = r.random();
        let y = if v1 < 0.5 {
            2.0 * v1 + v2
        } else {
            2.0 - 2.0 * v1 - v2
        } + noise(r);
        (alloc::vec![v1, v2], y)
    });
    Dataset::new(schema, instances, targets)
}

pub fn linear(rows: usize, seed: u64) -> Result<Dataset> {
    let schema = alloc::vec![
        FeatureSchema::cyclic("hour", 24.0)?,
        FeatureSchema::continuous("v_nl", 0.0, 1.0)?,
        FeatureSchema::continuous(LINEAR_FEATURE, 0.0, 1.0)?,
    ];
    let (instances, targets) = generate_rows(rows, seed, |r| {
        let hour = 24.0 * r.random::<f64>();
        let v_nl: f64 = r.random();
        let v_lin: f64 = r.random();
        let bump = v_nl - 0.5;
        let y = libm::sin(2.0 * PI * hour / 24.0)
            + libm::exp(-50.0 * bump * bump)
            + 2.0 * v_lin
            + noise(r);
        (alloc::vec![hour, v_nl, v_lin], y)
    });
    Dataset::new(schema, instances, targets)
}
