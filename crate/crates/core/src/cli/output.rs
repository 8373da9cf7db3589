//! Output files.
//!
//! Every file is written to a temporary sibling and renamed into place.
//!
//! The merged study table (`table.csv`) has one row per summary, sorted by
//! `n2` and then `n1`, with columns
//!
//! ```text
//! kind,task,n,p,n1,n2,k,lambda,reps,completed,seed,holdout_n,
//! mae_naive,mae_cv,mae_eb,mae_bayes,
//! rel_naive,rel_cv,rel_eb,rel_bayes,
//! coverage,mean_true_err0,baseline_mspe,nonconverged_fits
//! ```
//!
//! Estimator columns always appear in the order naive, cv, eb, bayes.
//! Missing values are empty fields.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulation::{StudySummary, SummaryKind, SUMMARY_SCHEMA_VERSION};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Reads a summary file, checking its schema version.
pub fn load_summary(path: &Path) -> Result<StudySummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SUMMARY_SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::SchemaMismatch(format!(
                "{}: schema_version {v}, expected {SUMMARY_SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => return Err(Error::SchemaMismatch(format!("{}: no schema_version", path.display()))),
    }
    serde_json::from_value(value).map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))
}

/// Sorts summaries by `(n2, n1)`. All must be of one kind and task.
pub fn merge_summaries(mut summaries: Vec<StudySummary>) -> Result<Vec<StudySummary>> {
    if let Some(first) = summaries.first() {
        let (kind, task) = (first.kind, first.task);
        if let Some(other) = summaries.iter().find(|s| s.kind != kind || s.task != task) {
            return Err(Error::SchemaMismatch(format!(
                "cannot merge a {:?}/{} summary with a {:?}/{} summary",
                kind, task, other.kind, other.task
            )));
        }
    }
    summaries.sort_by_key(|s| (s.n2, s.n1));
    Ok(summaries)
}

#[derive(Serialize)]
struct TableRow {
    kind: SummaryKind,
    task: crate::data::Task,
    n: usize,
    p: usize,
    n1: usize,
    n2: usize,
    k: usize,
    lambda: f64,
    reps: usize,
    completed: usize,
    seed: u64,
    holdout_n: Option<usize>,
    mae_naive: f64,
    mae_cv: f64,
    mae_eb: Option<f64>,
    mae_bayes: Option<f64>,
    rel_naive: f64,
    rel_cv: f64,
    rel_eb: Option<f64>,
    rel_bayes: Option<f64>,
    coverage: Option<f64>,
    mean_true_err0: f64,
    baseline_mspe: Option<f64>,
    nonconverged_fits: usize,
}

impl From<&StudySummary> for TableRow {
    fn from(s: &StudySummary) -> Self {
        TableRow {
            kind: s.kind,
            task: s.task,
            n: s.n,
            p: s.p,
            n1: s.n1,
            n2: s.n2,
            k: s.k,
            lambda: s.lambda,
            reps: s.reps,
            completed: s.completed,
            seed: s.seed,
            holdout_n: s.holdout_n,
            mae_naive: s.mean_abs_error.naive,
            mae_cv: s.mean_abs_error.cv,
            mae_eb: s.mean_abs_error.eb,
            mae_bayes: s.mean_abs_error.bayes,
            rel_naive: s.relative_mae.naive,
            rel_cv: s.relative_mae.cv,
            rel_eb: s.relative_mae.eb,
            rel_bayes: s.relative_mae.bayes,
            coverage: s.coverage,
            mean_true_err0: s.mean_true_err0,
            baseline_mspe: s.baseline_mspe,
            nonconverged_fits: s.nonconverged_fits,
        }
    }
}

pub fn table_csv(summaries: &[StudySummary]) -> Result<Vec<u8>> {
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summaries {
        w.serialize(TableRow::from(s)).map_err(ser)?;
    }
    w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
}

pub fn table_json(summaries: &[StudySummary]) -> Result<Vec<u8>> {
    to_json(&summaries.iter().map(TableRow::from).collect::<Vec<_>>())
}

/// Fixed-width text table for the terminal.
pub fn render_table(summaries: &[StudySummary]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"));
    let mut out = format!(
        "{:>5} {:>5} {:>10} {:>10} {:>10} {:>10} {:>8}\n",
        "n1", "n2", "naive", "cv", "eb", "bayes", "coverage"
    );
    for s in summaries {
        let m = &s.mean_abs_error;
        out.push_str(&format!(
            "{:>5} {:>5} {:>10.4} {:>10.4} {:>10} {:>10} {:>8}\n",
            s.n1,
            s.n2,
            m.naive,
            m.cv,
            opt(m.eb),
            opt(m.bayes),
            s.coverage.map_or_else(|| "-".to_owned(), |c| format!("{c:.3}"))
        ));
    }
    out
}

pub fn summary_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("summary_{stem}.json")), dir.join(format!("reps_{stem}.csv")))
}
