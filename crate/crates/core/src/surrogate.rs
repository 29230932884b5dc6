//! Proximity-weighted linear surrogates.
//!
//! The surrogate `g` is fit on a local encoding of each perturbation:
//!
//! * continuous: min-max normalized value;
//! * cyclic: the origin's normalized position plus the signed shorter-arc
//!   offset, so the design is continuous across the wrap point;
//! * categorical: `1` when the category equals the origin's, else `0`.
//!
//! Coefficients are therefore in normalized units.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::evaluation::FaithfulnessReport;
use crate::linalg::SquareMatrix;
use crate::perturbation::PerturbationSet;
use crate::schema::{wrap, FeatureKind, FeatureSchema, Instance};

/// Default candidate set: one ridge penalty per candidate surrogate.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];

const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearSurrogate {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub ridge_lambda: f64,
    /// Instance the local encoding is centred on.
    pub origin: Instance,
}

impl LinearSurrogate {
    pub fn predict(&self, z: &Instance, schema: &[FeatureSchema]) -> f64 {
        let row = encode(z, &self.origin, schema);
        self.intercept + dot(&self.coefficients, &row)
    }

    /// Coefficients per raw feature unit (normalized coefficient / feature scale).
    pub fn raw_unit_coefficients(&self, schema: &[FeatureSchema]) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(schema)
            .map(|(c, f)| c / f.scale())
            .collect()
    }
}

/// Local design row for `z` relative to `origin`.
pub fn encode(z: &Instance, origin: &Instance, schema: &[FeatureSchema]) -> Vec<f64> {
    schema
        .iter()
        .zip(z.values.iter().zip(&origin.values))
        .map(|(f, (&v, &o))| match &f.kind {
            FeatureKind::Continuous { .. } => f.normalize(v),
            FeatureKind::Cyclic { period } => {
                let mut delta = wrap(v - o, *period);
                if delta > period / 2.0 {
                    delta -= period;
                }
                f.normalize(o) + delta / period
            }
            FeatureKind::Categorical { .. } => {
                if v == o {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `Σ w_i (f(z_i) - g(z_i))² + λ‖β‖²` with an unpenalized intercept.
pub fn fit_weighted_linear(
    set: &PerturbationSet,
    lambda: f64,
    schema: &[FeatureSchema],
) -> Result<LinearSurrogate> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let n = set.len();
    let d = schema.len();
    if n == 0 {
        return Err(Error::InvalidData("no perturbations to fit".to_string()));
    }
    if set.predictions.len() != n || set.weights.len() != n {
        return Err(Error::InvalidData(format!(
            "{n} perturbations, {} predictions, {} weights",
            set.predictions.len(),
            set.weights.len()
        )));
    }
    if let Some(i) = set
        .weights
        .iter()
        .position(|w| !(w.is_finite() && *w > 0.0))
    {
        return Err(Error::InvalidData(format!("weight {i} is not positive")));
    }
    if lambda == 0.0 && n < d + 1 {
        return Err(Error::Singular(format!(
            "{n} perturbations cannot determine {} parameters; use lambda > 0 or more perturbations",
            d + 1
        )));
    }

    let rows: Vec<Vec<f64>> = set
        .perturbations
        .iter()
        .map(|z| encode(z, &set.origin, schema))
        .collect();
    // Accumulate in a canonical row order so the fit ignores input order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        canonical_cmp(&rows[a], &rows[b])
            .then(set.predictions[a].total_cmp(&set.predictions[b]))
            .then(set.weights[a].total_cmp(&set.weights[b]))
    });

    // argmin is unchanged by scaling the loss, so weights are rescaled to max 1
    // and λ with them. This keeps tiny kernel weights representable.
    let w_max = set.weights.iter().copied().fold(0.0, f64::max);
    let lambda = lambda / w_max;
    let w: Vec<f64> = set.weights.iter().map(|w| w / w_max).collect();

    let w_sum: f64 = order.iter().map(|&i| w[i]).sum();
    let mut x_mean = alloc::vec![0.0; d];
    let mut y_mean = 0.0;
    for &i in &order {
        for (m, v) in x_mean.iter_mut().zip(&rows[i]) {
            *m += w[i] * v;
        }
        y_mean += w[i] * set.predictions[i];
    }
    for m in &mut x_mean {
        *m /= w_sum;
    }
    y_mean /= w_sum;

    let mut gram = SquareMatrix::zeros(d);
    let mut rhs = alloc::vec![0.0; d];
    let mut centred = alloc::vec![0.0; d];
    for &i in &order {
        for (c, (v, m)) in centred.iter_mut().zip(rows[i].iter().zip(&x_mean)) {
            *c = v - m;
        }
        let dy = set.predictions[i] - y_mean;
        for a in 0..d {
            let wa = w[i] * centred[a];
            rhs[a] += wa * dy;
            for b in 0..=a {
                gram.add(a, b, wa * centred[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram.set(b, a, gram.get(a, b));
        }
        gram.add(a, a, lambda);
    }

    let coefficients = if d == 0 {
        Vec::new()
    } else {
        gram.solve_spd(&rhs, PIVOT_TOLERANCE).ok_or_else(|| {
            Error::Singular(if lambda == 0.0 {
                "weighted normal equations are singular; use lambda > 0 or more perturbations"
                    .to_string()
            } else {
                "weighted normal equations are numerically singular".to_string()
            })
        })?
    };
    let intercept = y_mean - dot(&coefficients, &x_mean);
    Ok(LinearSurrogate {
        coefficients,
        intercept,
        ridge_lambda: lambda * w_max,
        origin: set.origin.clone(),
    })
}

fn canonical_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// `sqrt(Σ w r² / Σ w)` over the perturbation set.
pub fn weighted_rmse(g: &LinearSurrogate, set: &PerturbationSet, schema: &[FeatureSchema]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((z, y), w) in set
        .perturbations
        .iter()
        .zip(&set.predictions)
        .zip(&set.weights)
    {
        let r = y - g.predict(z, schema);
        num += w * r * r;
        den += w;
    }
    libm::sqrt(num / den)
}

/// Fits one candidate per distinct λ and keeps the lowest weighted RMSE.
///
/// Ties go to the larger λ.
pub fn select_best(
    set: &PerturbationSet,
    lambda_grid: &[f64],
    schema: &[FeatureSchema],
) -> Result<LinearSurrogate> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".to_string()));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();

    let mut best: Option<(f64, LinearSurrogate)> = None;
    let mut last_err = None;
    for lambda in grid {
        match fit_weighted_linear(set, lambda, schema) {
            Ok(g) => {
                let err = weighted_rmse(&g, set, schema);
                if best.as_ref().is_none_or(|(e, _)| err < *e) {
                    best = Some((err, g));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, g)) => Ok(g),
        None => Err(last_err
            .unwrap_or_else(|| Error::Singular("no candidate surrogate could be fit".to_string()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Contribution {
    pub feature: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub surrogate: LinearSurrogate,
    /// Sorted by descending magnitude; ties keep schema order.
    pub contributions: Vec<Contribution>,
    pub local_prediction: f64,
    pub faithfulness: FaithfulnessReport,
    /// Feature names in schema order, matching `surrogate.coefficients`.
    pub features: Vec<String>,
}

pub fn explain(
    best: LinearSurrogate,
    x: &Instance,
    schema: &[FeatureSchema],
    faithfulness: FaithfulnessReport,
) -> Explanation {
    let mut contributions: Vec<Contribution> = schema
        .iter()
        .zip(&best.coefficients)
        .map(|(f, c)| Contribution {
            feature: f.name.clone(),
            coefficient: *c,
        })
        .collect();
    contributions.sort_by(|a, b| libm::fabs(b.coefficient).total_cmp(&libm::fabs(a.coefficient)));
    let local_prediction = best.predict(x, schema);
    let features = schema.iter().map(|f| f.name.clone()).collect();
    Explanation {
        surrogate: best,
        contributions,
        local_prediction,
        faithfulness,
        features,
    }
}
