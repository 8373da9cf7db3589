//! Run configuration: an optional TOML file, overridden field by field by
//! command-line flags.
//!
//! File keys (all optional):
//!
//! ```toml
//! task = "continuous"        # or "binary"
//! n1 = 100                   # training rows of split 0 (evaluate)
//! K = 39                     # additional random splits
//! lambda = 0.10
//! learner = "lasso"
//! alpha = 0.05
//! seed = 42
//! reps = 299
//! grid = [30, 50, 75, 100, 120]  # test sizes (simulate) or training sizes (benchmark)
//! n = 150                    # rows per simulated dataset, or benchmark working-set size
//! p = 50
//! noise_sd = 1.0
//! mc_n = 1000000
//! max_iter = 10000
//! tol = 1e-7
//! input = "hour.csv"
//! target = "cnt"
//! categorical = ["season"]
//! drop = ["instant", "dteday"]
//! holdout = 17079
//! surrogate_rows = 17379
//! output_dir = "out"
//! format = "columnar"        # or "structured"
//! chain = false
//!
//! [prior]
//! a0 = 0.01
//! b0 = 0.01
//! kappa0 = 1e-4
//!
//! [gibbs]
//! iterations = 10000
//! burn_in = 2000
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::Task;
use crate::error::{Error, Result};
use crate::estimators::{GibbsConfig, PriorSpec};
use crate::learners::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::RngState;
use crate::simulation::{SimConfig, DEFAULT_MC_N, DEFAULT_N2_GRID};

/// Benchmark training sizes when no grid is given.
pub const DEFAULT_N1_GRID: [usize; 4] = [50, 100, 140, 200];
pub const DEFAULT_WORKING_SET: usize = 300;
pub const DEFAULT_SURROGATE_ROWS: usize = 17_379;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// Comma-separated table with a header row.
    #[default]
    Columnar,
    /// JSON.
    Structured,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub kappa0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
}

/// Contents of a config file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<Task>,
    pub n1: Option<usize>,
    #[serde(alias = "K")]
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub learner: Option<String>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub grid: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub noise_sd: Option<f64>,
    pub mc_n: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub input: Option<PathBuf>,
    pub target: Option<String>,
    pub categorical: Option<Vec<String>>,
    pub drop: Option<Vec<String>>,
    pub holdout: Option<usize>,
    pub surrogate_rows: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub chain: Option<bool>,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub gibbs: GibbsSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Flag values; `None` means "not given on the command line".
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Outcome type: continuous or binary.
    #[arg(long)]
    pub task: Option<Task>,
    /// Training rows of split 0.
    #[arg(long)]
    pub n1: Option<usize>,
    /// Number of additional random splits.
    #[arg(short = 'K', long = "splits")]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Learner family; only `lasso` is built in.
    #[arg(long)]
    pub learner: Option<String>,
    /// Credible intervals have level 1 - alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated grid of test sizes (simulate) or training sizes (benchmark).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Monte-Carlo sample size for the true c-index.
    #[arg(long)]
    pub mc_n: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub b0: Option<f64>,
    #[arg(long)]
    pub kappa0: Option<f64>,
    /// Gibbs iterations M.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Gibbs burn-in M0.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Input CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Target column of the input.
    #[arg(long)]
    pub target: Option<String>,
    /// Columns to one-hot encode.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    /// Columns to ignore.
    #[arg(long, value_delimiter = ',')]
    pub drop: Option<Vec<String>>,
    /// Benchmark holdout rows (default: all rows outside the working set).
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Rows of the synthetic benchmark data used when no input is given.
    #[arg(long)]
    pub surrogate_rows: Option<usize>,
    #[arg(long, env = "CVSHRINK_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Also write the Gibbs chain (evaluate).
    #[arg(long)]
    pub chain: bool,
}

/// A fully resolved configuration for one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub n1: Option<usize>,
    pub k: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub seed: u64,
    pub reps: usize,
    pub grid: Vec<usize>,
    pub n: usize,
    pub p: usize,
    pub noise_sd: f64,
    pub mc_n: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub prior: PriorSpec,
    pub iterations: usize,
    pub burn_in: usize,
    pub input_path: Option<PathBuf>,
    pub target_column: Option<String>,
    pub categorical_columns: Vec<String>,
    pub drop_columns: Vec<String>,
    pub holdout: Option<usize>,
    pub surrogate_rows: usize,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub chain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Evaluate,
    Simulate,
    Benchmark,
}

impl RunConfig {
    /// Flags win over the file, the file over built-in defaults. Defaults
    /// depend on the subcommand: simulations use `n = 150`, `K = 39`;
    /// benchmarks a working set of 300 rows and `K = 40`.
    pub fn resolve(mode: Mode, file: FileConfig, flags: Overrides, seed: Option<u64>) -> Result<Self> {
        let f = flags;
        let task = f.task.or(file.task).unwrap_or(Task::Continuous);
        let learner = f.learner.or(file.learner).unwrap_or_else(|| "lasso".into());
        if learner != "lasso" {
            return Err(Error::InvalidConfig(format!("unknown learner `{learner}` (available: lasso)")));
        }
        let base = SimConfig::for_task(task, 1, 0);
        let (default_n, default_k, default_grid) = match mode {
            Mode::Benchmark => (DEFAULT_WORKING_SET, 40, DEFAULT_N1_GRID.to_vec()),
            _ => (base.n, base.k, DEFAULT_N2_GRID.to_vec()),
        };
        let defaults = PriorSpec::default();
        let gibbs = GibbsConfig::default();
        let cfg = RunConfig {
            task,
            n1: f.n1.or(file.n1),
            k: f.k.or(file.k).unwrap_or(default_k),
            lambda: f.lambda.or(file.lambda).unwrap_or(base.lambda),
            alpha: f.alpha.or(file.alpha).unwrap_or(base.alpha),
            seed: seed.or(file.seed).unwrap_or(0),
            reps: f.reps.or(file.reps).unwrap_or(base.reps),
            grid: f.grid.or(file.grid).unwrap_or(default_grid),
            n: f.n.or(file.n).unwrap_or(default_n),
            p: f.p.or(file.p).unwrap_or(base.p),
            noise_sd: f.noise_sd.or(file.noise_sd).unwrap_or(base.noise_sd),
            mc_n: f.mc_n.or(file.mc_n).unwrap_or(DEFAULT_MC_N),
            max_iter: f.max_iter.or(file.max_iter).unwrap_or(DEFAULT_MAX_ITER),
            tol: f.tol.or(file.tol).unwrap_or(DEFAULT_TOL),
            prior: PriorSpec {
                a0: f.a0.or(file.prior.a0).unwrap_or(defaults.a0),
                b0: f.b0.or(file.prior.b0).unwrap_or(defaults.b0),
                kappa0: f.kappa0.or(file.prior.kappa0).unwrap_or(defaults.kappa0),
            },
            iterations: f.iterations.or(file.gibbs.iterations).unwrap_or(gibbs.iterations),
            burn_in: f.burn_in.or(file.gibbs.burn_in).unwrap_or(gibbs.burn_in),
            input_path: f.input.or(file.input),
            target_column: f.target.or(file.target),
            categorical_columns: f.categorical.or(file.categorical).unwrap_or_default(),
            drop_columns: f.drop.or(file.drop).unwrap_or_default(),
            holdout: f.holdout.or(file.holdout),
            surrogate_rows: f.surrogate_rows.or(file.surrogate_rows).unwrap_or(DEFAULT_SURROGATE_ROWS),
            output_dir: f.output_dir.or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
            format: f.format.or(file.format).unwrap_or_default(),
            chain: f.chain || file.chain.unwrap_or(false),
        };
        cfg.validate(mode)?;
        Ok(cfg)
    }

    fn validate(&self, mode: Mode) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        self.prior.validate()?;
        self.gibbs(RngState::new(self.seed)).validate()?;
        match mode {
            Mode::Evaluate => {
                if self.input_path.is_none() || self.target_column.is_none() {
                    return bad("evaluate needs an input file and a target column".into());
                }
                if self.n1.is_none() {
                    return bad("evaluate needs n1, the training size of split 0".into());
                }
            }
            Mode::Simulate => {
                if self.grid.is_empty() {
                    return bad("empty grid".into());
                }
                if let Some(&n2) = self.grid.iter().find(|&&n2| n2 < 2 || n2 >= self.n) {
                    return bad(format!("grid test size {n2} must lie in [2, {})", self.n));
                }
            }
            Mode::Benchmark => {
                if self.grid.is_empty() {
                    return bad("empty grid".into());
                }
                if self.input_path.is_some() && self.target_column.is_none() {
                    return bad("benchmark input needs a target column".into());
                }
                if let Some(&n1) = self.grid.iter().find(|&&n1| n1 < 1 || n1 + 2 > self.n) {
                    return bad(format!("grid training size {n1} must lie in [1, {}]", self.n.saturating_sub(2)));
                }
            }
        }
        Ok(())
    }

    pub fn gibbs(&self, rng: RngState) -> GibbsConfig {
        GibbsConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            rng,
            fixed_hyperparameters: None,
        }
    }

    /// Simulation settings for one training size. In a simulation with a
    /// non-default `p`, the first `min(4, p)` true coefficients are 0.5.
    pub fn sim_config(&self, n1: usize) -> SimConfig {
        let mut beta0 = vec![0.0; self.p];
        let active = self.p.min(4);
        beta0[..active].fill(0.5);
        SimConfig {
            task: self.task,
            n: self.n,
            p: self.p,
            beta0,
            noise_sd: self.noise_sd,
            n1,
            k: self.k,
            lambda: self.lambda,
            reps: self.reps,
            prior: self.prior,
            gibbs: self.gibbs(RngState::new(self.seed)),
            alpha: self.alpha,
            seed: RngState::new(self.seed),
            mc_n: self.mc_n,
            learner_max_iter: self.max_iter,
            learner_tol: self.tol,
        }
    }
}
