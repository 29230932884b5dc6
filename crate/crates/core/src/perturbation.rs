//! Synthetic neighbourhoods around the instance being explained.
//!
//! [`lime_perturb`] draws every feature independently around `x`.
//! [`chilli_perturb`] picks a training anchor by proximity and places each
//! perturbation on the segment between `x` and that anchor, so perturbations
//! stay inside the data's per-feature range and keep feature dependencies.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::proximity::{self, squared_distance, ProximityConfig};
use crate::rng::{self, StreamRng};
use crate::schema::{wrap, Dataset, FeatureKind, FeatureSchema, FeatureStats, Instance};

/// Default number of perturbations per explanation.
pub const DEFAULT_NUM_PERTURBATIONS: usize = 1000;

/// Default number of rows sent to the base model per call.
pub const DEFAULT_BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Lime,
    Chilli,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lime => "lime",
            Method::Chilli => "chilli",
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lime" => Ok(Method::Lime),
            "chilli" => Ok(Method::Chilli),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Labelled and weighted perturbations of one instance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationSet {
    pub origin: Instance,
    pub perturbations: Vec<Instance>,
    pub predictions: Vec<f64>,
    pub weights: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    pub proximity: ProximityConfig,
}

impl PerturbationSet {
    pub fn len(&self) -> usize {
        self.perturbations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perturbations.is_empty()
    }

    /// Number of non-categorical feature values outside the schema's domain.
    pub fn out_of_bounds_count(&self, schema: &[FeatureSchema]) -> usize {
        count_out_of_bounds(&self.perturbations, schema)
    }
}

pub fn count_out_of_bounds(instances: &[Instance], schema: &[FeatureSchema]) -> usize {
    instances
        .iter()
        .map(|z| {
            schema
                .iter()
                .zip(&z.values)
                .filter(|(f, v)| !f.is_categorical() && !f.in_bounds(**v))
                .count()
        })
        .sum()
}

/// How anchors are drawn from the proximity weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnchorSampling {
    /// Categorical draw from proximities normalized to sum to one.
    #[default]
    SumNormalized,
    /// Proximities divided by their maximum, used as acceptance
    /// probabilities for uniformly proposed anchors.
    MaxNormalized,
}

/// Anchor selection probabilities, one per training instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorDistribution {
    probabilities: Vec<f64>,
}

impl AnchorDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Each probability divided by the largest one.
    pub fn max_normalized(&self) -> Vec<f64> {
        let max = self.probabilities.iter().copied().fold(0.0, f64::max);
        self.probabilities.iter().map(|p| p / max).collect()
    }

    /// Builds a distribution from arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "anchor weights must be non-negative with a positive sum".to_string(),
            ));
        }
        Ok(AnchorDistribution {
            probabilities: weights.iter().map(|w| w / total).collect(),
        })
    }

    fn sampler(&self, sampling: AnchorSampling) -> Result<AnchorSampler> {
        match sampling {
            AnchorSampling::SumNormalized => WeightedIndex::new(&self.probabilities)
                .map(AnchorSampler::Weighted)
                .map_err(|e| Error::InvalidParameter(format!("anchor distribution: {e}"))),
            AnchorSampling::MaxNormalized => Ok(AnchorSampler::Rejection(self.max_normalized())),
        }
    }
}

enum AnchorSampler {
    Weighted(WeightedIndex<f64>),
    Rejection(Vec<f64>),
}

impl AnchorSampler {
    fn sample(&self, rng: &mut StreamRng) -> usize {
        match self {
            AnchorSampler::Weighted(index) => index.sample(rng),
            AnchorSampler::Rejection(accept) => loop {
                let i = rng.random_range(0..accept.len());
                if rng.random::<f64>() < accept[i] {
                    return i;
                }
            },
        }
    }
}

/// Proximity of each training instance to `x`, normalized to sum to one.
///
/// Evaluated relative to the closest instance so that very small σ does not
/// underflow every weight to zero.
pub fn anchor_distribution(
    x: &Instance,
    dataset: &Dataset,
    config: &ProximityConfig,
) -> AnchorDistribution {
    let schema = dataset.schema();
    let d2: Vec<f64> = dataset
        .instances()
        .iter()
        .map(|xi| squared_distance(x, xi, config.kernel, schema))
        .collect();
    let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let s2 = config.sigma * config.sigma;
    let rel: Vec<f64> = d2.iter().map(|d| libm::exp(-(d - nearest) / s2)).collect();
    let total: f64 = rel.iter().sum();
    AnchorDistribution {
        probabilities: rel.into_iter().map(|p| p / total).collect(),
    }
}

/// Features whose training standard deviation is zero.
///
/// LIME holds these at the instance's value.
pub fn constant_features(dataset: &Dataset) -> Vec<usize> {
    dataset
        .stats()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.std() == Some(0.0))
        .map(|(i, _)| i)
        .collect()
}

/// Gaussian perturbations around `x` scaled by the training standard deviation.
///
/// Categorical features are resampled from the training frequencies. Values
/// are not clipped to the schema bounds.
pub fn lime_perturb(x: &Instance, dataset: &Dataset, n: usize, seed: u64) -> Result<Vec<Instance>> {
    check_request(x, dataset, n)?;
    let samplers: Vec<Option<WeightedIndex<f64>>> = dataset
        .stats()
        .iter()
        .map(|s| match s {
            FeatureStats::Categorical { frequencies } => {
                WeightedIndex::new(frequencies.iter().map(|(_, p)| *p)).ok()
            }
            FeatureStats::Numeric { .. } => None,
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng::stream(seed, i as u64);
        let values = dataset
            .stats()
            .iter()
            .zip(&samplers)
            .zip(&x.values)
            .map(|((stats, sampler), &xf)| match (stats, sampler) {
                (FeatureStats::Numeric { std, .. }, _) => {
                    let eps: f64 = rng.sample(StandardNormal);
                    if *std == 0.0 {
                        xf
                    } else {
                        xf + std * eps
                    }
                }
                (FeatureStats::Categorical { .. }, Some(sampler)) => {
                    sampler.sample(&mut rng) as f64
                }
                (FeatureStats::Categorical { .. }, None) => xf,
            })
            .collect();
        out.push(Instance::new(values));
    }
    Ok(out)
}

/// Point at fraction `t` of the way from `x` to `anchor`.
///
/// Continuous features interpolate linearly, cyclic features along the
/// shorter arc, and categorical features take the nearer endpoint
/// (`x` when `t <= 0.5`). `t = 0` yields `x` and `t = 1` yields `anchor`.
pub fn interpolate(x: &Instance, anchor: &Instance, t: f64, schema: &[FeatureSchema]) -> Instance {
    let values = schema
        .iter()
        .zip(x.values.iter().zip(&anchor.values))
        .map(|(feature, (&a, &b))| interpolate_value(a, b, t, feature))
        .collect();
    Instance::new(values)
}

fn interpolate_value(a: f64, b: f64, t: f64, feature: &FeatureSchema) -> f64 {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    match &feature.kind {
        FeatureKind::Continuous { .. } => ((1.0 - t) * a + t * b).clamp(a.min(b), a.max(b)),
        FeatureKind::Cyclic { period } => {
            let p = *period;
            let mut delta = wrap(b - a, p);
            if delta > p / 2.0 {
                delta -= p;
            }
            wrap(a + t * delta, p)
        }
        FeatureKind::Categorical { .. } => {
            if t <= 0.5 {
                a
            } else {
                b
            }
        }
    }
}

/// Interpolation perturbations anchored on proximity-sampled training instances.
pub fn chilli_perturb(
    x: &Instance,
    dataset: &Dataset,
    n: usize,
    config: &ProximityConfig,
    seed: u64,
) -> Result<Vec<Instance>> {
    chilli_perturb_with(x, dataset, n, config, seed, AnchorSampling::SumNormalized)
}

pub fn chilli_perturb_with(
    x: &Instance,
    dataset: &Dataset,
    n: usize,
    config: &ProximityConfig,
    seed: u64,
    sampling: AnchorSampling,
) -> Result<Vec<Instance>> {
    check_request(x, dataset, n)?;
    let sampler = anchor_distribution(x, dataset, config).sampler(sampling)?;
    let schema = dataset.schema();
    Ok((0..n)
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let t: f64 = rng.random();
            let anchor = &dataset.instances()[sampler.sample(&mut rng)];
            interpolate(x, anchor, t, schema)
        })
        .collect())
}

/// Indices of the anchors [`chilli_perturb_with`] draws for the same arguments.
pub fn chilli_anchor_indices(
    x: &Instance,
    dataset: &Dataset,
    n: usize,
    config: &ProximityConfig,
    seed: u64,
    sampling: AnchorSampling,
) -> Result<Vec<usize>> {
    check_request(x, dataset, n)?;
    let sampler = anchor_distribution(x, dataset, config).sampler(sampling)?;
    Ok((0..n)
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let _t: f64 = rng.random();
            sampler.sample(&mut rng)
        })
        .collect())
}

fn check_request(x: &Instance, dataset: &Dataset, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "number of perturbations must be >= 1".to_string(),
        ));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidData("training set is empty".to_string()));
    }
    x.validate(dataset.schema())
}

/// Runs the base model over `perturbations` in batches and attaches proximity weights to `origin`.
#[allow(clippy::too_many_arguments)]
pub fn label_perturbations(
    origin: &Instance,
    perturbations: Vec<Instance>,
    model: &dyn Predictor,
    schema: &[FeatureSchema],
    config: &ProximityConfig,
    method: Method,
    seed: u64,
    batch_size: usize,
) -> Result<PerturbationSet> {
    let batch_size = batch_size.max(1);
    let mut predictions = Vec::with_capacity(perturbations.len());
    for (batch_index, batch) in perturbations.chunks(batch_size).enumerate() {
        let out = model.predict_batch(batch).map_err(|e| Error::Model {
            batch_index,
            message: e.to_string(),
        })?;
        if out.len() != batch.len() {
            return Err(Error::Model {
                batch_index,
                message: format!("expected {} predictions, got {}", batch.len(), out.len()),
            });
        }
        predictions.extend(out);
    }
    let weights = perturbations
        .iter()
        .map(|z| proximity::proximity(origin, z, config, schema))
        .collect();
    Ok(PerturbationSet {
        origin: origin.clone(),
        perturbations,
        predictions,
        weights,
        method,
        seed,
        proximity: *config,
    })
}
