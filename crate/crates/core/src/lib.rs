//! Local surrogate explanations for black-box tabular regressors.
//!
//! Two explainers share one pipeline: perturb around an instance, label the
//! perturbations with the base model, weight them by proximity and fit a
//! weighted linear surrogate whose coefficients are the explanation.
//!
//! * `lime`: independent Gaussian perturbations scaled by the training
//!   standard deviation, weighted with a Euclidean exponential kernel.
//! * `chilli`: perturbations interpolated between the instance and a training
//!   anchor drawn by proximity, weighted with a per-feature contextual kernel
//!   that understands bounds, cyclic wrap-around and categories.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the external
//! model adapter and the CLI live in the `chilli` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bench;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod models;
pub mod perturbation;
pub mod proximity;
pub mod rng;
pub mod schema;
pub mod surrogate;

pub use error::{Error, Result};
pub use evaluation::{
    compare_explainers, contribution_variance, faithfulness, run_explainer, sigma_sweep,
    ComparisonRun, ExplainerConfig, FaithfulnessReport, FeatureSpread, Method, SweepRow,
};
pub use models::{KnnRegressor, Predictor, RbfRidgeRegressor};
pub use perturbation::{AnchorDistribution, PerturbationSet};
pub use proximity::{Kernel, ProximityConfig};
pub use schema::{Dataset, FeatureDecl, FeatureKind, FeatureSchema, FeatureStats, Instance};
pub use surrogate::{Contribution, Explanation, LinearSurrogate};
