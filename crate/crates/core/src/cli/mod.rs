//! The `cvshrink` command line.
//!
//! ```text
//! cvshrink evaluate  --input data.csv --target y --n1 100 [--chain]
//! cvshrink simulate  --seed 1 [--task binary] [--grid 30,50,75,100,120]
//! cvshrink benchmark --seed 1 [--input hour.csv --target cnt] [--grid 50,100,140,200]
//! cvshrink report    out/summary_*.json
//! ```
//!
//! Each subcommand also reads `--config file.toml`; flags override file
//! values (see [`config`] for the keys). The output directory may be given
//! by `CVSHRINK_OUTPUT_DIR`.
//!
//! Exit status: 0 on success, 2 for configuration errors (including
//! unusable paths), 3 for data errors, 4 for numerical failures.

pub mod config;
pub mod ingest;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::Dataset;
use crate::error::{Error, ErrorClass, Result, ResultExt};
use crate::estimators::PerformanceReport;
use crate::learners::{ConstantFeatures, LearnerSpec};
use crate::pipeline::evaluate_dataset;
use crate::rng::RngState;
use crate::simulation::{gen_benchmark_surrogate, run_benchmark, run_study, StudySummary};

pub use config::{FileConfig, Mode, OutputFormat, Overrides, RunConfig};
pub use ingest::{ingest_csv, CsvSchema};

#[derive(Debug, Parser)]
#[command(name = "cvshrink", version, about = "Shrinkage estimates of a trained model's held-out performance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the performance of the split-0 model on a CSV dataset.
    Evaluate(EvaluateArgs),
    /// Simulation study over a grid of test sizes.
    Simulate(StudyArgs),
    /// Large-holdout benchmark over a grid of training sizes.
    Benchmark(StudyArgs),
    /// Merge summary files into one table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required = true)]
    pub seed: u64,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary files, or directories holding `summary_*.json` files.
    #[arg(required = true)]
    pub summaries: Vec<PathBuf>,
    #[arg(long, env = "CVSHRINK_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

pub fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config | ErrorClass::Io => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate(args) => {
            let cfg = resolve(Mode::Evaluate, args.config.as_deref(), args.overrides, args.seed)?;
            let report = cmd_evaluate(&cfg)?;
            print!("{}", describe_report(&report));
        }
        Command::Simulate(args) => {
            let cfg = resolve(Mode::Simulate, args.config.as_deref(), args.overrides, Some(args.seed))?;
            print!("{}", output::render_table(&cmd_simulate(&cfg)?));
        }
        Command::Benchmark(args) => {
            let cfg = resolve(Mode::Benchmark, args.config.as_deref(), args.overrides, Some(args.seed))?;
            let summaries = cmd_benchmark(&cfg)?;
            print!("{}", output::render_table(&summaries));
            for s in &summaries {
                if let Some(b) = s.baseline_mspe {
                    println!("n1 = {}: constant-predictor MSPE {b:.4}", s.n1);
                }
            }
        }
        Command::Report(args) => {
            let dir = args.output_dir.unwrap_or_else(|| PathBuf::from("."));
            print!("{}", output::render_table(&cmd_report(&args.summaries, &dir, args.format)?));
        }
    }
    Ok(())
}

pub fn resolve(mode: Mode, config: Option<&Path>, overrides: Overrides, seed: Option<u64>) -> Result<RunConfig> {
    let file = match config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    RunConfig::resolve(mode, file, overrides, seed).stage("config", None)
}

fn schema(cfg: &RunConfig) -> Result<CsvSchema> {
    let target = cfg
        .target_column
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no target column".into()))?;
    Ok(CsvSchema {
        categorical: cfg.categorical_columns.clone(),
        drop: cfg.drop_columns.clone(),
        ..CsvSchema::new(target, cfg.task)
    })
}

fn learner(cfg: &RunConfig) -> LearnerSpec {
    LearnerSpec {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        constant_features: ConstantFeatures::Ignore,
        ..LearnerSpec::for_task(cfg.task, cfg.lambda)
    }
}

/// Runs the full procedure on the input file and writes `report.json`
/// (plus `chain.csv` when requested) to the output directory.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<PerformanceReport> {
    let path = cfg
        .input_path
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no input file".into()))?;
    let data = ingest_csv(path, &schema(cfg)?).stage("ingest", None)?;
    let n1 = cfg.n1.ok_or_else(|| Error::InvalidConfig("n1 is required".into()))?;
    let base = RngState::new(cfg.seed);
    let eval = evaluate_dataset(
        &data,
        n1,
        cfg.k,
        &learner(cfg),
        &cfg.prior,
        &cfg.gibbs(base.substream(2)),
        cfg.alpha,
        &base.substream(1),
    )?;
    output::write_atomic(&cfg.output_dir.join("report.json"), &output::to_json(&eval.report)?)?;
    if cfg.chain {
        if let Some(chain) = &eval.chain {
            let mut buf = Vec::new();
            chain
                .write_columnar(&mut buf)
                .map_err(|e| Error::Serialization(e.to_string()))?;
            output::write_atomic(&cfg.output_dir.join("chain.csv"), &buf)?;
        }
    }
    Ok(eval.report)
}

pub fn describe_report(r: &PerformanceReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.6}"));
    let mut out = format!(
        "naive {:.6}\ncv    {:.6}\neb    {}\nbayes {}\n",
        r.naive,
        r.cv,
        opt(r.eb),
        opt(r.bayes)
    );
    if let Some(ci) = &r.credible_interval {
        out.push_str(&format!("{:.0}% interval [{:.6}, {:.6}]\n", ci.level * 100.0, ci.lower, ci.upper));
    }
    for note in &r.diagnostics.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    out
}

fn write_summaries(cfg: &RunConfig, summaries: &[StudySummary], stem: impl Fn(&StudySummary) -> String) -> Result<()> {
    for s in summaries {
        let (json, reps) = output::summary_paths(&cfg.output_dir, &stem(s));
        output::write_atomic(&json, &output::to_json(s)?)?;
        let mut buf = Vec::new();
        s.write_rep_table(&mut buf)?;
        output::write_atomic(&reps, &buf)?;
    }
    write_table(&cfg.output_dir, cfg.format, summaries)
}

fn write_table(dir: &Path, format: OutputFormat, summaries: &[StudySummary]) -> Result<()> {
    match format {
        OutputFormat::Columnar => output::write_atomic(&dir.join("table.csv"), &output::table_csv(summaries)?),
        OutputFormat::Structured => output::write_atomic(&dir.join("table.json"), &output::table_json(summaries)?),
    }
}

/// One simulation study per grid test size `n2` (training size `n - n2`).
/// Writes `summary_n2_XXX.json`, `reps_n2_XXX.csv` and the merged table.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<StudySummary>> {
    let mut summaries = Vec::with_capacity(cfg.grid.len());
    for &n2 in &cfg.grid {
        summaries.push(run_study(&cfg.sim_config(cfg.n - n2)).stage("simulate", None)?);
    }
    let summaries = output::merge_summaries(summaries)?;
    write_summaries(cfg, &summaries, |s| format!("n2_{:03}", s.n2))?;
    Ok(summaries)
}

/// Data for a benchmark: the input file if one is configured, otherwise
/// the synthetic surrogate drawn from the run seed.
pub fn benchmark_data(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.input_path {
        Some(path) => ingest_csv(path, &schema(cfg)?).stage("ingest", None),
        None => gen_benchmark_surrogate(cfg.surrogate_rows, &RngState::with_stream(cfg.seed, 1)).stage("surrogate", None),
    }
}

/// One benchmark per grid training size `n1`, each on a working set of
/// `n` rows. Writes `summary_n1_XXX.json`, `reps_n1_XXX.csv` and the merged
/// table.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<Vec<StudySummary>> {
    let data = benchmark_data(cfg)?;
    if data.n() <= cfg.n {
        return Err(Error::InsufficientData(format!(
            "{} rows leave no holdout beside a working set of {}",
            data.n(),
            cfg.n
        )));
    }
    let holdout = cfg.holdout.unwrap_or(data.n() - cfg.n);
    let mut summaries = Vec::with_capacity(cfg.grid.len());
    for &n1 in &cfg.grid {
        let mut sim = cfg.sim_config(n1);
        sim.p = data.p();
        sim.beta0 = vec![0.0; data.p()];
        summaries.push(run_benchmark(&data, holdout, &sim).stage("benchmark", None)?);
    }
    let summaries = output::merge_summaries(summaries)?;
    write_summaries(cfg, &summaries, |s| format!("n1_{:03}", s.n1))?;
    Ok(summaries)
}

/// Loads and merges summaries, writing `table.csv` (or `table.json`).
pub fn cmd_report(inputs: &[PathBuf], output_dir: &Path, format: OutputFormat) -> Result<Vec<StudySummary>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("summary_") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidConfig("no summary files found".into()));
    }
    let summaries = files.iter().map(|f| output::load_summary(f)).collect::<Result<Vec<_>>>()?;
    let summaries = output::merge_summaries(summaries)?;
    write_table(output_dir, format, &summaries)?;
    Ok(summaries)
}
