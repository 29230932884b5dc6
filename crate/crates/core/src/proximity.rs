//! Exponential proximity kernels.
//!
//! Both kernels have the form `exp(-D² / σ²)`. They differ in `D`:
//!
//! * [`Kernel::Euclidean`]: Euclidean norm over normalized values, with an
//!   indicator distance for categoricals. Cyclic values are treated as plain
//!   numbers, so 23:00 and 00:00 end up far apart.
//! * [`Kernel::Contextual`]: the mean of per-feature distances, each already
//!   in `[0, 1]` and aware of the feature's bounds, period or categories.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::schema::{wrap, Dataset, FeatureKind, FeatureSchema, Instance};

/// Default σ for the contextual kernel.
pub const DEFAULT_CONTEXTUAL_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Kernel {
    Euclidean,
    Contextual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProximityConfig {
    pub sigma: f64,
    pub kernel: Kernel,
}

impl ProximityConfig {
    pub fn new(sigma: f64, kernel: Kernel) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        Ok(ProximityConfig { sigma, kernel })
    }

    pub fn contextual(sigma: f64) -> Result<Self> {
        Self::new(sigma, Kernel::Contextual)
    }

    pub fn euclidean(sigma: f64) -> Result<Self> {
        Self::new(sigma, Kernel::Euclidean)
    }

    /// Conventional LIME kernel width, `0.75 * sqrt(d)`.
    pub fn lime_default_sigma(n_features: usize) -> f64 {
        0.75 * libm::sqrt(n_features as f64)
    }
}

/// Context-aware distance between two values of one feature, in `[0, 1]`.
pub fn feature_distance(a: f64, b: f64, feature: &FeatureSchema) -> f64 {
    match &feature.kind {
        FeatureKind::Continuous { .. } => {
            libm::fabs(feature.normalize(a) - feature.normalize(b)).clamp(0.0, 1.0)
        }
        FeatureKind::Cyclic { period } => {
            let delta = wrap(libm::fabs(a - b), *period);
            let arc = delta.min(period - delta);
            (arc / (period / 2.0)).clamp(0.0, 1.0)
        }
        FeatureKind::Categorical { .. } => {
            if a == b {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Mean of [`feature_distance`] over all features.
pub fn aggregate_distance(p: &Instance, q: &Instance, schema: &[FeatureSchema]) -> f64 {
    debug_assert_eq!(p.len(), schema.len());
    debug_assert_eq!(q.len(), schema.len());
    let total: f64 = schema
        .iter()
        .zip(p.values.iter().zip(&q.values))
        .map(|(f, (a, b))| feature_distance(*a, *b, f))
        .sum();
    total / schema.len() as f64
}

/// Squared Euclidean distance between normalized instances.
pub fn euclidean_squared(p: &Instance, q: &Instance, schema: &[FeatureSchema]) -> f64 {
    schema
        .iter()
        .zip(p.values.iter().zip(&q.values))
        .map(|(f, (a, b))| {
            if f.is_categorical() {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            } else {
                let d = f.normalize(*a) - f.normalize(*b);
                d * d
            }
        })
        .sum()
}

/// `D²(p, q)` for the configured kernel.
pub fn squared_distance(
    p: &Instance,
    q: &Instance,
    kernel: Kernel,
    schema: &[FeatureSchema],
) -> f64 {
    match kernel {
        Kernel::Contextual => {
            let d = aggregate_distance(p, q, schema);
            d * d
        }
        Kernel::Euclidean => euclidean_squared(p, q, schema),
    }
}

/// `exp(-D² / σ²)`, floored at the smallest positive normal so weights stay in `(0, 1]`.
pub fn kernel_weight(squared_distance: f64, sigma: f64) -> f64 {
    libm::exp(-squared_distance / (sigma * sigma)).max(f64::MIN_POSITIVE)
}

pub fn proximity(
    p: &Instance,
    q: &Instance,
    config: &ProximityConfig,
    schema: &[FeatureSchema],
) -> f64 {
    kernel_weight(squared_distance(p, q, config.kernel, schema), config.sigma)
}

/// Proximity of `x` to every training instance, in dataset order.
pub fn proximity_vector(x: &Instance, dataset: &Dataset, config: &ProximityConfig) -> Vec<f64> {
    dataset
        .instances()
        .iter()
        .map(|xi| proximity(x, xi, config, dataset.schema()))
        .collect()
}
