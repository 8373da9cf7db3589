use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{gen_binary, gen_continuous};
use super::truth::{true_cindex, true_mspe};
use super::SimConfig;
use crate::data::{Dataset, Task};
use crate::error::{Error, Result, ResultExt};
use crate::estimators::{GibbsConfig, PerformanceReport};
use crate::learners::{ConstantFeatures, Learner, LearnerSpec, Predictor};
use crate::metrics::cindex_with_variance;
use crate::pipeline::evaluate_dataset;
use crate::rng::RngState;
use crate::split::sample_indices;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Abort threshold: a study fails when more than this share of replications fail.
const MAX_FAILURE_SHARE: f64 = 0.10;

/// One value per estimator, always in the order naive, cv, eb, bayes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorErrors {
    pub naive: f64,
    pub cv: f64,
    pub eb: Option<f64>,
    pub bayes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: usize,
    pub true_err0: f64,
    pub report: PerformanceReport,
    pub abs_errors: EstimatorErrors,
    /// `None` when no interval was produced (single split).
    pub interval_covers: Option<bool>,
    /// Constant-predictor MSPE on the holdout (benchmark only).
    pub baseline_mspe: Option<f64>,
}

impl RepResult {
    fn new(rep: usize, true_err0: f64, report: PerformanceReport, baseline_mspe: Option<f64>) -> Self {
        let abs = |x: f64| (x - true_err0).abs();
        let abs_errors = EstimatorErrors {
            naive: abs(report.naive),
            cv: abs(report.cv),
            eb: report.eb.map(abs),
            bayes: report.bayes.map(abs),
        };
        let interval_covers = report.credible_interval.map(|ci| ci.contains(true_err0));
        RepResult {
            rep,
            true_err0,
            report,
            abs_errors,
            interval_covers,
            baseline_mspe,
        }
    }

    pub fn row(&self) -> RepRow {
        let r = &self.report;
        RepRow {
            rep: self.rep,
            true_err0: self.true_err0,
            naive: r.naive,
            cv: r.cv,
            eb: r.eb,
            bayes: r.bayes,
            lower: r.credible_interval.map(|c| c.lower),
            upper: r.credible_interval.map(|c| c.upper),
            covers: self.interval_covers,
            tau2_hat: r.tau2_hat,
            tau2_clipped: r.tau2_clipped,
            nonconverged: r.diagnostics.learner_nonconverged.len(),
        }
    }
}

/// Flat per-replication record, one line of the columnar table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub true_err0: f64,
    pub naive: f64,
    pub cv: f64,
    pub eb: Option<f64>,
    pub bayes: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub covers: Option<bool>,
    pub tau2_hat: Option<f64>,
    pub tau2_clipped: bool,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryKind {
    Study,
    Benchmark,
}

/// Aggregate over replications at one `(n1, n2)` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub schema_version: u32,
    pub kind: SummaryKind,
    pub task: Task,
    pub n: usize,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub lambda: f64,
    pub reps: usize,
    pub seed: u64,
    pub holdout_n: Option<usize>,
    pub completed: usize,
    pub mean_abs_error: EstimatorErrors,
    /// Mean absolute error divided by the mean true performance.
    pub relative_mae: EstimatorErrors,
    /// Share of intervals containing the truth.
    pub coverage: Option<f64>,
    pub mean_true_err0: f64,
    pub baseline_mspe: Option<f64>,
    pub failures: Vec<RepFailure>,
    pub nonconverged_fits: usize,
    #[serde(skip)]
    pub rows: Vec<RepRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl StudySummary {
    fn aggregate(kind: SummaryKind, cfg: &SimConfig, p: usize, holdout_n: Option<usize>, outcomes: Vec<Result<RepResult>>) -> Result<Self> {
        let reps = outcomes.len();
        let mut results = Vec::with_capacity(reps);
        let mut failures = Vec::new();
        for (rep, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(r) => results.push(r),
                Err(e) => failures.push(RepFailure {
                    rep,
                    message: e.to_string(),
                }),
            }
        }
        if failures.len() as f64 > MAX_FAILURE_SHARE * reps as f64 || results.is_empty() {
            return Err(Error::StudyAborted {
                failed: failures.len(),
                reps,
                first: failures.first().map(|f| format!("rep {}: {}", f.rep, f.message)).unwrap_or_default(),
            });
        }

        let all = |f: fn(&RepResult) -> Option<f64>| {
            let vals: Vec<f64> = results.iter().filter_map(f).collect();
            if vals.len() == results.len() {
                mean(vals.into_iter())
            } else {
                None
            }
        };
        let mean_abs_error = EstimatorErrors {
            naive: mean(results.iter().map(|r| r.abs_errors.naive)).unwrap_or(f64::NAN),
            cv: mean(results.iter().map(|r| r.abs_errors.cv)).unwrap_or(f64::NAN),
            eb: all(|r| r.abs_errors.eb),
            bayes: all(|r| r.abs_errors.bayes),
        };
        let mean_true_err0 = mean(results.iter().map(|r| r.true_err0)).unwrap_or(f64::NAN);
        let rel = |v: f64| v / mean_true_err0;
        let relative_mae = EstimatorErrors {
            naive: rel(mean_abs_error.naive),
            cv: rel(mean_abs_error.cv),
            eb: mean_abs_error.eb.map(rel),
            bayes: mean_abs_error.bayes.map(rel),
        };
        let coverage = all(|r| r.interval_covers.map(f64::from));
        let baseline_mspe = all(|r| r.baseline_mspe);
        let nonconverged_fits = results.iter().map(|r| r.report.diagnostics.learner_nonconverged.len()).sum();

        Ok(StudySummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            kind,
            task: cfg.task,
            n: cfg.n,
            p,
            n1: cfg.n1,
            n2: cfg.n2(),
            k: cfg.k,
            lambda: cfg.lambda,
            reps,
            seed: cfg.seed.seed,
            holdout_n,
            completed: results.len(),
            mean_abs_error,
            relative_mae,
            coverage,
            mean_true_err0,
            baseline_mspe,
            failures,
            nonconverged_fits,
            rows: results.iter().map(RepResult::row).collect(),
        })
    }

    /// Per-replication table as comma-separated text with a header row;
    /// missing values are empty fields.
    pub fn write_rep_table<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row).map_err(|e| Error::Serialization(e.to_string()))?;
        }
        if self.rows.is_empty() {
            out.write_record([
                "rep", "true_err0", "naive", "cv", "eb", "bayes", "lower", "upper", "covers", "tau2_hat",
                "tau2_clipped", "nonconverged",
            ])
            .map_err(|e| Error::Serialization(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Streams for one replication: data, splits, sampler, Monte-Carlo truth.
struct RepStreams {
    data: RngState,
    splits: RngState,
    gibbs: RngState,
    truth: RngState,
}

impl RepStreams {
    fn new(seed: &RngState, rep: usize) -> Self {
        let base = seed.substream(rep as u64);
        RepStreams {
            data: base.substream(0),
            splits: base.substream(1),
            gibbs: base.substream(2),
            truth: base.substream(3),
        }
    }

    fn gibbs_config(&self, template: &GibbsConfig) -> GibbsConfig {
        GibbsConfig {
            rng: self.gibbs,
            ..template.clone()
        }
    }
}

/// One replication of a simulation study.
pub fn run_replicate(cfg: &SimConfig, rep: usize) -> Result<RepResult> {
    let streams = RepStreams::new(&cfg.seed, rep);
    let data = match cfg.task {
        Task::Continuous => gen_continuous(cfg, &streams.data),
        Task::Binary => gen_binary(cfg, &streams.data),
    }
    .stage("generate", None)?;
    let learner = cfg.learner();
    let eval = evaluate_dataset(
        &data,
        cfg.n1,
        cfg.k,
        &learner,
        &cfg.prior,
        &streams.gibbs_config(&cfg.gibbs),
        cfg.alpha,
        &streams.splits,
    )?;
    let model = &eval.split0_model;
    let truth = match cfg.task {
        Task::Continuous => true_mspe(model, &cfg.beta0, cfg.noise_sd),
        Task::Binary => true_cindex(model, &cfg.beta0, cfg.noise_sd, cfg.mc_n, &streams.truth).map(|t| t.value),
    }
    .stage("truth", Some(0))?;
    Ok(RepResult::new(rep, truth, eval.report, None))
}

/// Runs `cfg.reps` independent replications (in parallel, each on its own
/// streams) and aggregates them. The result does not depend on thread
/// scheduling.
pub fn run_study(cfg: &SimConfig) -> Result<StudySummary> {
    cfg.validate()?;
    let outcomes: Vec<Result<RepResult>> = (0..cfg.reps).into_par_iter().map(|rep| run_replicate(cfg, rep)).collect();
    StudySummary::aggregate(SummaryKind::Study, cfg, cfg.p, None, outcomes)
}

/// Large-holdout benchmark with the built-in lasso learner for the task.
/// Features constant on a training set (for example rare one-hot levels)
/// are left out of that fit.
pub fn run_benchmark(data: &Dataset, holdout_n: usize, cfg: &SimConfig) -> Result<StudySummary> {
    let learner = LearnerSpec {
        constant_features: ConstantFeatures::Ignore,
        ..cfg.learner()
    };
    run_benchmark_with(data, holdout_n, cfg, &learner)
}

/// Large-holdout benchmark. Each replication draws a working set of
/// `cfg.n` rows and a disjoint holdout of `holdout_n` rows, runs the whole
/// procedure on the working set, and scores the estimates against the
/// split-0 model's loss on the holdout. For continuous tasks the holdout
/// MSPE of the split-0 training mean is reported as a baseline.
pub fn run_benchmark_with<L: Learner>(data: &Dataset, holdout_n: usize, cfg: &SimConfig, learner: &L) -> Result<StudySummary> {
    if data.task() != cfg.task || learner.task() != cfg.task {
        return Err(Error::InvalidConfig(format!(
            "benchmark task {} does not match the data ({}) or learner ({})",
            cfg.task,
            data.task(),
            learner.task()
        )));
    }
    if cfg.n1 < 1 || cfg.n1 + 2 > cfg.n {
        return Err(Error::InvalidSizes { n: cfg.n, n1: cfg.n1 });
    }
    if cfg.reps < 1 || !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidConfig("reps must be >= 1 and alpha in (0, 1)".into()));
    }
    cfg.prior.validate()?;
    cfg.gibbs.validate()?;
    if holdout_n < 2 || data.n() < cfg.n + holdout_n {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot hold a working set of {} plus a holdout of {holdout_n}",
            data.n(),
            cfg.n
        )));
    }
    let outcomes: Vec<Result<RepResult>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| benchmark_replicate(data, holdout_n, cfg, learner, rep))
        .collect();
    StudySummary::aggregate(SummaryKind::Benchmark, cfg, data.p(), Some(holdout_n), outcomes)
}

fn benchmark_replicate<L: Learner>(data: &Dataset, holdout_n: usize, cfg: &SimConfig, learner: &L, rep: usize) -> Result<RepResult> {
    let streams = RepStreams::new(&cfg.seed, rep);
    let drawn = sample_indices(data.n(), cfg.n + holdout_n, &mut streams.data.rng());
    let (working_rows, holdout_rows) = drawn.split_at(cfg.n);
    let working = data.subset(working_rows).stage("working set", None)?;
    let eval = evaluate_dataset(
        &working,
        cfg.n1,
        cfg.k,
        learner,
        &cfg.prior,
        &streams.gibbs_config(&cfg.gibbs),
        cfg.alpha,
        &streams.splits,
    )?;
    let model = &eval.split0_model;
    let scores: Vec<f64> = holdout_rows.iter().map(|&i| model.score(data.row(i))).collect();
    let (truth, baseline) = match cfg.task {
        Task::Continuous => {
            let mse = |pred: &dyn Fn(usize) -> f64| {
                holdout_rows
                    .iter()
                    .enumerate()
                    .map(|(h, &i)| {
                        let r = data.target(i) - pred(h);
                        r * r
                    })
                    .sum::<f64>()
                    / holdout_n as f64
            };
            let train = eval.splits[0].train_indices();
            let train_mean = train.iter().map(|&i| working.target(i)).sum::<f64>() / train.len() as f64;
            (mse(&|h| scores[h]), Some(mse(&|_| train_mean)))
        }
        Task::Binary => {
            let positive: Vec<bool> = holdout_rows.iter().map(|&i| data.target(i) == 1.0).collect();
            let (auc, _) = cindex_with_variance(&scores, &positive).stage("truth", Some(0))?;
            (auc, None)
        }
    };
    Ok(RepResult::new(rep, truth, eval.report, baseline))
}
