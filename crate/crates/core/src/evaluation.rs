//! Faithfulness metrics and the experiment drivers built on them.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::perturbation::{
    self, chilli_perturb_with, label_perturbations, lime_perturb, AnchorSampling, PerturbationSet,
    DEFAULT_BATCH_SIZE, DEFAULT_NUM_PERTURBATIONS,
};
use crate::proximity::{Kernel, ProximityConfig, DEFAULT_CONTEXTUAL_SIGMA};
use crate::rng;
use crate::schema::{Dataset, FeatureSchema, Instance};
use crate::surrogate::{self, Explanation, LinearSurrogate, DEFAULT_LAMBDA_GRID};

pub use crate::perturbation::Method;

/// Agreement between the base model and a surrogate on a perturbation set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FaithfulnessReport {
    pub rmse: f64,
    pub mae: f64,
    /// RMSE with proximity weights normalized to sum to one.
    pub weighted_rmse: f64,
    pub n_perturbations: usize,
    pub out_of_bounds_count: usize,
}

pub fn faithfulness(
    g: &LinearSurrogate,
    set: &PerturbationSet,
    schema: &[FeatureSchema],
) -> FaithfulnessReport {
    let n = set.len();
    if n == 0 {
        return FaithfulnessReport::default();
    }
    let w_sum: f64 = set.weights.iter().sum();
    let (mut sq, mut abs, mut wsq) = (0.0, 0.0, 0.0);
    for ((z, y), w) in set
        .perturbations
        .iter()
        .zip(&set.predictions)
        .zip(&set.weights)
    {
        let r = y - g.predict(z, schema);
        sq += r * r;
        abs += libm::fabs(r);
        wsq += (w / w_sum) * r * r;
    }
    FaithfulnessReport {
        rmse: libm::sqrt(sq / n as f64),
        mae: abs / n as f64,
        weighted_rmse: libm::sqrt(wsq),
        n_perturbations: n,
        out_of_bounds_count: set.out_of_bounds_count(schema),
    }
}

/// Headline error used to compare explainers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Metric {
    #[default]
    Rmse,
    Mae,
}

impl Metric {
    pub fn of(&self, report: &FaithfulnessReport) -> f64 {
        match self {
            Metric::Rmse => report.rmse,
            Metric::Mae => report.mae,
        }
    }
}

impl core::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(Metric::Rmse),
            "mae" => Ok(Metric::Mae),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

/// Settings shared by every explanation an experiment produces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplainerConfig {
    pub num_perturbations: usize,
    /// σ of the contextual kernel used by CHILLI.
    pub sigma: f64,
    /// σ of LIME's Euclidean kernel; `None` means `0.75 * sqrt(d)`.
    pub lime_sigma: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    pub metric: Metric,
    pub anchor_sampling: AnchorSampling,
    /// Score surrogates on a second, independently seeded perturbation set.
    pub eval_on_fresh: bool,
    pub batch_size: usize,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            num_perturbations: DEFAULT_NUM_PERTURBATIONS,
            sigma: DEFAULT_CONTEXTUAL_SIGMA,
            lime_sigma: None,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            seed: 0,
            metric: Metric::Rmse,
            anchor_sampling: AnchorSampling::SumNormalized,
            eval_on_fresh: false,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

impl ExplainerConfig {
    /// Kernel and σ a method uses under this configuration.
    pub fn proximity(&self, method: Method, n_features: usize) -> Result<ProximityConfig> {
        match method {
            Method::Chilli => ProximityConfig::new(self.sigma, Kernel::Contextual),
            Method::Lime => ProximityConfig::new(
                self.lime_sigma
                    .unwrap_or_else(|| ProximityConfig::lime_default_sigma(n_features)),
                Kernel::Euclidean,
            ),
        }
    }
}

/// Everything produced while explaining one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRun {
    pub explanation: Explanation,
    pub perturbations: PerturbationSet,
    /// Base-model prediction at the explained instance.
    pub model_prediction: f64,
    /// Features LIME held constant because their training std is zero.
    pub constant_features: Vec<usize>,
}

/// Generates and labels one perturbation set.
pub fn perturb_and_label(
    x: &Instance,
    dataset: &Dataset,
    model: &dyn Predictor,
    method: Method,
    proximity: &ProximityConfig,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<PerturbationSet> {
    let n = config.num_perturbations;
    let z = match method {
        Method::Lime => lime_perturb(x, dataset, n, seed)?,
        Method::Chilli => {
            chilli_perturb_with(x, dataset, n, proximity, seed, config.anchor_sampling)?
        }
    };
    label_perturbations(
        x,
        z,
        model,
        dataset.schema(),
        proximity,
        method,
        seed,
        config.batch_size,
    )
}

/// Perturb, label, select the best surrogate and score it.
pub fn run_explainer(
    x: &Instance,
    dataset: &Dataset,
    model: &dyn Predictor,
    method: Method,
    proximity: &ProximityConfig,
    config: &ExplainerConfig,
) -> Result<ExplanationRun> {
    let schema = dataset.schema();
    let set = perturb_and_label(x, dataset, model, method, proximity, config, config.seed)?;
    let best = surrogate::select_best(&set, &config.lambda_grid, schema)?;
    let report = if config.eval_on_fresh {
        let fresh_seed = rng::derive_seed(config.seed, 0x5EED);
        let fresh = perturb_and_label(x, dataset, model, method, proximity, config, fresh_seed)?;
        faithfulness(&best, &fresh, schema)
    } else {
        faithfulness(&best, &set, schema)
    };
    let model_prediction = model
        .predict_batch(core::slice::from_ref(x))
        .map_err(|e| Error::Model {
            batch_index: 0,
            message: e.to_string(),
        })?
        .first()
        .copied()
        .ok_or_else(|| Error::Model {
            batch_index: 0,
            message: "no prediction".to_string(),
        })?;
    let constant_features = match method {
        Method::Lime => perturbation::constant_features(dataset),
        Method::Chilli => Vec::new(),
    };
    Ok(ExplanationRun {
        explanation: surrogate::explain(best, x, schema, report),
        perturbations: set,
        model_prediction,
        constant_features,
    })
}

/// Per-instance outcome of a two-method comparison.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstanceComparison {
    pub instance_id: usize,
    pub model_prediction: f64,
    pub lime_error: f64,
    pub chilli_error: f64,
    pub lime_local_prediction: f64,
    pub chilli_local_prediction: f64,
    pub lime_out_of_bounds: usize,
    pub chilli_out_of_bounds: usize,
    /// Surrogate coefficients in schema order.
    pub lime_coefficients: Vec<f64>,
    pub chilli_coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRun {
    pub features: Vec<String>,
    /// Methods filling the `lime_*` and `chilli_*` slots, in that order.
    pub methods: [Method; 2],
    pub config: ExplainerConfig,
    pub pool_size: usize,
    pub instances: Vec<InstanceComparison>,
    pub lime_average: f64,
    pub chilli_average: f64,
    /// `(lime_average - chilli_average) / lime_average * 100`.
    pub reduction_percent: f64,
}

impl ComparisonRun {
    pub fn instance_ids(&self) -> Vec<usize> {
        self.instances.iter().map(|r| r.instance_id).collect()
    }

    /// Instances where the second method has strictly lower error.
    pub fn chilli_wins(&self) -> usize {
        self.instances
            .iter()
            .filter(|r| r.chilli_error < r.lime_error)
            .count()
    }

    pub fn lime_spread(&self) -> Result<Vec<FeatureSpread>> {
        let rows: Vec<&[f64]> = self
            .instances
            .iter()
            .map(|r| &r.lime_coefficients[..])
            .collect();
        coefficient_spread(&self.features, &rows)
    }

    pub fn chilli_spread(&self) -> Result<Vec<FeatureSpread>> {
        let rows: Vec<&[f64]> = self
            .instances
            .iter()
            .map(|r| &r.chilli_coefficients[..])
            .collect();
        coefficient_spread(&self.features, &rows)
    }
}

/// `n` distinct row indices drawn uniformly from `0..pool`, ascending.
pub fn sample_instance_ids(pool: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > pool {
        return Err(Error::InvalidParameter(format!(
            "cannot select {n} instances from a pool of {pool}"
        )));
    }
    let mut rng = rng::stream(rng::derive_seed(seed, 0x1D5), 0);
    let mut ids = index::sample(&mut rng, pool, n).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// LIME against CHILLI on `n_instances` uniformly selected training rows.
pub fn compare_explainers(
    dataset: &Dataset,
    model: &dyn Predictor,
    n_instances: usize,
    config: &ExplainerConfig,
) -> Result<ComparisonRun> {
    compare_methods(
        dataset,
        model,
        n_instances,
        config,
        [Method::Lime, Method::Chilli],
    )
}

/// Two explainers on the same instances, seeds and base model.
pub fn compare_methods(
    dataset: &Dataset,
    model: &dyn Predictor,
    n_instances: usize,
    config: &ExplainerConfig,
    methods: [Method; 2],
) -> Result<ComparisonRun> {
    let ids = sample_instance_ids(dataset.len(), n_instances, config.seed)?;
    let d = dataset.n_features();
    let prox = [
        config.proximity(methods[0], d)?,
        config.proximity(methods[1], d)?,
    ];
    let mut instances = Vec::with_capacity(ids.len());
    for &id in &ids {
        let wrap = |e: Error| Error::Instance {
            instance_id: id,
            source: Box::new(e),
        };
        let x = &dataset.instances()[id];
        let cfg = ExplainerConfig {
            seed: rng::derive_seed(config.seed, id as u64),
            ..config.clone()
        };
        let a = run_explainer(x, dataset, model, methods[0], &prox[0], &cfg).map_err(wrap)?;
        let b = run_explainer(x, dataset, model, methods[1], &prox[1], &cfg).map_err(wrap)?;
        instances.push(InstanceComparison {
            instance_id: id,
            model_prediction: a.model_prediction,
            lime_error: config.metric.of(&a.explanation.faithfulness),
            chilli_error: config.metric.of(&b.explanation.faithfulness),
            lime_local_prediction: a.explanation.local_prediction,
            chilli_local_prediction: b.explanation.local_prediction,
            lime_out_of_bounds: a.explanation.faithfulness.out_of_bounds_count,
            chilli_out_of_bounds: b.explanation.faithfulness.out_of_bounds_count,
            lime_coefficients: a.explanation.surrogate.coefficients,
            chilli_coefficients: b.explanation.surrogate.coefficients,
        });
    }
    let mean = |f: fn(&InstanceComparison) -> f64| {
        if instances.is_empty() {
            0.0
        } else {
            instances.iter().map(f).sum::<f64>() / instances.len() as f64
        }
    };
    let lime_average = mean(|r| r.lime_error);
    let chilli_average = mean(|r| r.chilli_error);
    Ok(ComparisonRun {
        features: dataset.schema().iter().map(|f| f.name.clone()).collect(),
        methods,
        config: config.clone(),
        pool_size: dataset.len(),
        instances,
        lime_average,
        chilli_average,
        reduction_percent: percent_reduction(lime_average, chilli_average),
    })
}

/// `(baseline - candidate) / baseline * 100`, or 0 when the baseline error is 0.
pub fn percent_reduction(baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - candidate) / baseline * 100.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub sigma: f64,
    pub method: Method,
    pub mae: f64,
    pub rmse: f64,
}

/// Both methods' errors for one instance at each σ, all else fixed.
///
/// σ is applied to each method's own kernel. Rows are ordered by σ, then
/// LIME before CHILLI; every cell reuses `config.seed`.
pub fn sigma_sweep(
    dataset: &Dataset,
    model: &dyn Predictor,
    x: &Instance,
    sigmas: &[f64],
    config: &ExplainerConfig,
) -> Result<Vec<SweepRow>> {
    if sigmas.is_empty() {
        return Err(Error::InvalidParameter("sigma list is empty".to_string()));
    }
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(2 * sorted.len());
    for sigma in sorted {
        for (method, kernel) in [
            (Method::Lime, Kernel::Euclidean),
            (Method::Chilli, Kernel::Contextual),
        ] {
            let prox = ProximityConfig::new(sigma, kernel)?;
            let run = run_explainer(x, dataset, model, method, &prox, config)?;
            let f = run.explanation.faithfulness;
            rows.push(SweepRow {
                sigma,
                method,
                mae: f.mae,
                rmse: f.rmse,
            });
        }
    }
    Ok(rows)
}

/// Median and quartiles of one feature's coefficients across explanations.
///
/// Quartiles use linear interpolation between order statistics
/// (position `p * (n - 1)`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSpread {
    pub feature: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub const QUARTILE_CONVENTION: &str = "linear interpolation at p*(n-1)";

pub fn contribution_variance(runs: &[Explanation]) -> Result<Vec<FeatureSpread>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no explanations to summarize".to_string()))?;
    let names = &first.features;
    if let Some(bad) = runs.iter().position(|e| e.features != *names) {
        return Err(Error::InvalidData(format!(
            "explanation {bad} has a different schema"
        )));
    }
    let rows: Vec<&[f64]> = runs.iter().map(|e| &e.surrogate.coefficients[..]).collect();
    coefficient_spread(names, &rows)
}

/// Per-feature quartiles over coefficient rows in schema order.
pub fn coefficient_spread(features: &[String], rows: &[&[f64]]) -> Result<Vec<FeatureSpread>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter(
            "no explanations to summarize".to_string(),
        ));
    }
    features
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let mut column: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            column.sort_by(f64::total_cmp);
            Ok(FeatureSpread {
                feature: name.clone(),
                q1: quantile_sorted(&column, 0.25),
                median: quantile_sorted(&column, 0.5),
                q3: quantile_sorted(&column, 0.75),
            })
        })
        .collect()
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
