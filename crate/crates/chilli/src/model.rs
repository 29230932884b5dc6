//! Base-model handles, including the subprocess adapter.
//!
//! An external model is any command that accepts one argument, the path of a
//! CSV file whose header is the schema's feature names, and prints exactly one
//! decimal prediction per data row on stdout, in order.

use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::Mutex;

use chilli_core::models::{KnnRegressor, Predictor, RbfRidgeRegressor};
use chilli_core::{Dataset, FeatureSchema, Instance};
use serde::Serialize;

use crate::io::instances_to_csv;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_GAMMA: f64 = 10.0;
pub const DEFAULT_ALPHA: f64 = 1e-3;

/// A model choice from the command line: `knn`, `rbf` or `external:CMD`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Knn,
    Rbf,
    External(String),
}

impl FromStr for ModelSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "knn" => Ok(ModelSpec::Knn),
            "rbf" => Ok(ModelSpec::Rbf),
            _ => match s.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(ModelSpec::External(cmd.to_string())),
                Some(_) => Err("external model needs a command after `external:`".to_string()),
                None => Err(format!(
                    "unknown model `{s}` (expected knn, rbf or external:CMD)"
                )),
            },
        }
    }
}

/// Runs a shell command once per batch. Invocations through one handle are
/// serialized.
#[derive(Debug)]
pub struct ExternalModel {
    command: String,
    schema: Vec<FeatureSchema>,
    lock: Mutex<()>,
}

fn model_error(message: impl Into<String>) -> chilli_core::Error {
    chilli_core::Error::Model {
        batch_index: 0,
        message: message.into(),
    }
}

impl ExternalModel {
    pub fn new(command: impl Into<String>, schema: &[FeatureSchema]) -> Self {
        ExternalModel {
            command: command.into(),
            schema: schema.to_vec(),
            lock: Mutex::new(()),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn run(&self, instances: &[Instance]) -> chilli_core::Result<Vec<f64>> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut input = tempfile::Builder::new()
            .prefix("chilli-batch-")
            .suffix(".csv")
            .tempfile()
            .map_err(|e| model_error(format!("creating batch file: {e}")))?;
        instances_to_csv(input.as_file_mut(), &self.schema, instances)
            .map_err(|e| model_error(format!("writing batch file: {e}")))?;

        let output = Command::new("sh")
            .arg("-c")
            .arg(format!("{} \"$1\"", self.command))
            .arg("chilli-model")
            .arg(input.path())
            .stdin(Stdio::null())
            .output()
            .map_err(|e| model_error(format!("starting `{}`: {e}", self.command)))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(model_error(format!(
                "`{}` exited with {}: {}",
                self.command,
                output.status,
                stderr.trim()
            )));
        }
        let stdout = String::from_utf8(output.stdout)
            .map_err(|_| model_error("model output is not UTF-8"))?;
        parse_predictions(&stdout, instances.len())
    }
}

/// One finite decimal per line; a single trailing newline is allowed.
pub fn parse_predictions(stdout: &str, expected: usize) -> chilli_core::Result<Vec<f64>> {
    let body = stdout.strip_suffix('\n').unwrap_or(stdout);
    let body = body.strip_suffix('\r').unwrap_or(body);
    if body.is_empty() {
        return if expected == 0 {
            Ok(Vec::new())
        } else {
            Err(model_error(format!(
                "expected {expected} predictions, got 0"
            )))
        };
    }
    let values = body
        .split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.trim();
            line.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| model_error(format!("line {}: `{line}` is not a prediction", i + 1)))
        })
        .collect::<chilli_core::Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(model_error(format!(
            "expected {expected} predictions, got {}",
            values.len()
        )));
    }
    Ok(values)
}

impl Predictor for ExternalModel {
    fn predict_batch(&self, instances: &[Instance]) -> chilli_core::Result<Vec<f64>> {
        if instances.is_empty() {
            return Ok(Vec::new());
        }
        self.run(instances)
    }
}

#[derive(Debug)]
pub enum PredictorHandle {
    Knn(KnnRegressor),
    Rbf(RbfRidgeRegressor),
    External(ExternalModel),
}

/// Parameters of a handle, as dumped to JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Knn { k: usize },
    RbfKernelRidge { gamma: f64, alpha: f64 },
    External { command: String },
}

impl PredictorHandle {
    pub fn train(
        spec: &ModelSpec,
        dataset: &Dataset,
        k: usize,
        gamma: f64,
        alpha: f64,
    ) -> chilli_core::Result<Self> {
        Ok(match spec {
            ModelSpec::Knn => PredictorHandle::Knn(KnnRegressor::train(dataset, k)?),
            ModelSpec::Rbf => {
                PredictorHandle::Rbf(RbfRidgeRegressor::train(dataset, gamma, alpha)?)
            }
            ModelSpec::External(cmd) => {
                PredictorHandle::External(ExternalModel::new(cmd.clone(), dataset.schema()))
            }
        })
    }

    pub fn params(&self) -> ModelParams {
        match self {
            PredictorHandle::Knn(m) => ModelParams::Knn { k: m.k() },
            PredictorHandle::Rbf(m) => ModelParams::RbfKernelRidge {
                gamma: m.gamma(),
                alpha: m.alpha(),
            },
            PredictorHandle::External(m) => ModelParams::External {
                command: m.command.clone(),
            },
        }
    }
}

impl Predictor for PredictorHandle {
    fn predict_batch(&self, instances: &[Instance]) -> chilli_core::Result<Vec<f64>> {
        match self {
            PredictorHandle::Knn(m) => m.predict_batch(instances),
            PredictorHandle::Rbf(m) => m.predict_batch(instances),
            PredictorHandle::External(m) => m.predict_batch(instances),
        }
    }
}
