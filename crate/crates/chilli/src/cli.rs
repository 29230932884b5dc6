use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chilli_core::bench::Benchmark;
use chilli_core::evaluation::{compare_explainers, sigma_sweep, ExplainerConfig, Metric};
use chilli_core::perturbation::{AnchorSampling, DEFAULT_BATCH_SIZE, DEFAULT_NUM_PERTURBATIONS};
use chilli_core::proximity::{Kernel, DEFAULT_CONTEXTUAL_SIGMA};
use chilli_core::surrogate::DEFAULT_LAMBDA_GRID;
use chilli_core::{run_explainer, Dataset, Method, ProximityConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{ModelSpec, PredictorHandle, DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_K};

#[derive(Debug, Parser)]
#[command(
    name = "chilli",
    version,
    about = "Local surrogate explanations for tabular regressors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain one instance and write the explanation as JSON.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
    },
    /// Compare LIME and CHILLI on uniformly selected instances.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Number of instances to explain.
        #[arg(long, default_value_t = 25)]
        instances: usize,
        /// Drop this feature (and retrain the model) before comparing.
        #[arg(long)]
        drop_feature: Option<String>,
        /// Output directory for comparison.json, comparison.csv and spread.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both methods' errors for one instance across kernel widths.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
        /// Output directory for sweep.csv and sweep.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one labelled perturbation set as CSV.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
    },
    /// Synthetic benchmark datasets.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Generate a benchmark CSV and its schema JSON.
    Gen {
        #[arg(long, value_enum)]
        name: BenchName,
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BenchName {
    Sinusoid,
    Piecewise,
    Linear,
}

impl From<BenchName> for Benchmark {
    fn from(b: BenchName) -> Self {
        match b {
            BenchName::Sinusoid => Benchmark::Sinusoid,
            BenchName::Piecewise => Benchmark::Piecewise,
            BenchName::Linear => Benchmark::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Lime,
    Chilli,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lime => Method::Lime,
            MethodArg::Chilli => Method::Chilli,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Rmse,
    Mae,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplingArg {
    /// Anchor probabilities normalized to sum to one.
    Sum,
    /// Probabilities divided by their maximum (rejection sampling).
    Max,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Training data CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON.
    #[arg(long)]
    pub schema: PathBuf,
    /// Target column in the data CSV.
    #[arg(long)]
    pub target: String,
    /// knn, rbf, or external:CMD.
    #[arg(long, default_value = "rbf", value_parser = clap::value_parser!(ModelSpec))]
    pub model: ModelSpec,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Kernel width. For explain/perturb, applies to the chosen method
    /// (LIME defaults to 0.75*sqrt(d)); for compare, to CHILLI.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// LIME kernel width in compare (default 0.75*sqrt(d)).
    #[arg(long)]
    pub lime_sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_NUM_PERTURBATIONS)]
    pub num_perturbations: usize,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "rmse")]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value = "sum")]
    pub anchor_sampling: SamplingArg,
    /// Score surrogates on a fresh, independently seeded perturbation set.
    #[arg(long)]
    pub eval_fresh: bool,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Row of the data CSV to explain (0-based, excluding the header).
    #[arg(long)]
    pub instance: usize,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> ExplainerConfig {
        ExplainerConfig {
            num_perturbations: self.num_perturbations,
            sigma: self.sigma.unwrap_or(DEFAULT_CONTEXTUAL_SIGMA),
            lime_sigma: self.lime_sigma,
            lambda_grid: self
                .lambda_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec()),
            seed: self.seed,
            metric: match self.metric {
                MetricArg::Rmse => Metric::Rmse,
                MetricArg::Mae => Metric::Mae,
            },
            anchor_sampling: match self.anchor_sampling {
                SamplingArg::Sum => AnchorSampling::SumNormalized,
                SamplingArg::Max => AnchorSampling::MaxNormalized,
            },
            eval_on_fresh: self.eval_fresh,
            batch_size: self.batch_size,
        }
    }

    fn load(&self) -> Result<Dataset> {
        let decls = io::load_schema(&self.schema)?;
        io::load_dataset(&self.data, &decls, &self.target)
    }

    fn model(&self, dataset: &Dataset) -> Result<PredictorHandle> {
        Ok(PredictorHandle::train(
            &self.model,
            dataset,
            self.k,
            self.gamma,
            self.alpha,
        )?)
    }

    /// Kernel for a single-method run: `--sigma` overrides the method default.
    fn single_proximity(&self, method: Method, d: usize) -> Result<ProximityConfig> {
        let sigma = match method {
            Method::Chilli => self.sigma.unwrap_or(DEFAULT_CONTEXTUAL_SIGMA),
            Method::Lime => self
                .sigma
                .or(self.lime_sigma)
                .unwrap_or_else(|| ProximityConfig::lime_default_sigma(d)),
        };
        let kernel = match method {
            Method::Chilli => Kernel::Contextual,
            Method::Lime => Kernel::Euclidean,
        };
        Ok(ProximityConfig::new(sigma, kernel)?)
    }
}

fn row(dataset: &Dataset, instance: usize) -> Result<&chilli_core::Instance> {
    dataset.instances().get(instance).ok_or_else(|| {
        Error::Usage(format!(
            "--instance {instance} is out of range (dataset has {} rows)",
            dataset.len()
        ))
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => io::write_file(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Explain { common, target } => {
            let dataset = common.load()?;
            let model = common.model(&dataset)?;
            let method = Method::from(target.method);
            let x = row(&dataset, target.instance)?;
            let prox = common.single_proximity(method, dataset.n_features())?;
            let run = run_explainer(x, &dataset, &model, method, &prox, &common.config())?;
            let constant = run
                .constant_features
                .iter()
                .map(|&f| dataset.schema()[f].name.clone())
                .collect();
            let doc = io::ExplanationDoc::new(
                target.instance,
                &run.explanation,
                &run.perturbations,
                run.model_prediction,
                constant,
            );
            emit(target.out.as_deref(), io::to_json(&doc).as_bytes())
        }
        Command::Perturb { common, target } => {
            let dataset = common.load()?;
            let model = common.model(&dataset)?;
            let method = Method::from(target.method);
            let x = row(&dataset, target.instance)?;
            let prox = common.single_proximity(method, dataset.n_features())?;
            let config = common.config();
            let set = chilli_core::evaluation::perturb_and_label(
                x,
                &dataset,
                &model,
                method,
                &prox,
                &config,
                config.seed,
            )?;
            emit(
                target.out.as_deref(),
                &io::perturbations_to_csv(&set, dataset.schema())?,
            )
        }
        Command::Compare {
            common,
            instances,
            drop_feature,
            out,
        } => {
            let mut dataset = common.load()?;
            if let Some(name) = &drop_feature {
                dataset = dataset.without_feature(name)?;
            }
            let model = common.model(&dataset)?;
            let run = compare_explainers(&dataset, &model, instances, &common.config())?;
            let json = io::to_json(&run);
            match out {
                Some(dir) => {
                    io::write_file(&dir.join("comparison.json"), json.as_bytes())?;
                    io::write_file(&dir.join("comparison.csv"), &io::comparison_to_csv(&run)?)?;
                    let spread = io::SpreadDoc::from_run(&run)?;
                    io::write_file(&dir.join("spread.json"), io::to_json(&spread).as_bytes())
                }
                None => emit(None, json.as_bytes()),
            }
        }
        Command::Sweep {
            common,
            instance,
            sigmas,
            out,
        } => {
            let dataset = common.load()?;
            let model = common.model(&dataset)?;
            let x = row(&dataset, instance)?;
            let rows = sigma_sweep(&dataset, &model, x, &sigmas, &common.config())?;
            let csv = io::sweep_to_csv(&rows)?;
            match out {
                Some(dir) => {
                    io::write_file(&dir.join("sweep.csv"), &csv)?;
                    io::write_file(&dir.join("sweep.json"), io::to_json(&rows).as_bytes())
                }
                None => emit(None, &csv),
            }
        }
        Command::Bench {
            command:
                BenchCommand::Gen {
                    name,
                    rows,
                    seed,
                    out,
                },
        } => {
            let bench = Benchmark::from(name);
            let dataset = bench.generate(rows, seed)?;
            let stem = bench.name();
            io::write_file(
                &out.join(format!("{stem}.csv")),
                &io::dataset_to_csv(&dataset, "y")?,
            )?;
            io::write_file(
                &out.join(format!("{stem}.schema.json")),
                io::schema_to_json(dataset.schema()).as_bytes(),
            )
        }
    }
}

/// Parses arguments, runs, and reports failures as JSON on stderr.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = Error::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
