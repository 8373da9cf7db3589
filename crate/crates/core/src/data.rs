//! In-memory datasets: a dense row-major feature matrix plus one target per row.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome type. Continuous targets are scored with squared error, binary
/// targets (coded 0/1) with the c-index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Continuous,
    Binary,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Continuous => "continuous",
            Task::Binary => "binary",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Task::Continuous),
            "binary" => Ok(Task::Binary),
            other => Err(Error::InvalidConfig(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    n: usize,
    p: usize,
    task: Task,
    feature_names: Option<Vec<String>>,
    fingerprint: u64,
}

impl Dataset {
    /// Builds a dataset from a row-major `n x p` feature buffer.
    pub fn new(features: Vec<f64>, p: usize, targets: Vec<f64>, task: Task) -> Result<Self> {
        let n = targets.len();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 rows, got {n}")));
        }
        if features.len() != n * p {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} values, expected {n} x {p}",
                features.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / p.max(1),
                pos % p.max(1)
            )));
        }
        for (i, &y) in targets.iter().enumerate() {
            let ok = match task {
                Task::Continuous => y.is_finite(),
                Task::Binary => y == 0.0 || y == 1.0,
            };
            if !ok {
                return Err(Error::InvalidDataset(format!(
                    "invalid {task} target {y} at row {i}"
                )));
            }
        }
        let fingerprint = fingerprint(&features, &targets, p);
        Ok(Dataset {
            features,
            targets,
            n,
            p,
            task,
            feature_names: None,
            fingerprint,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} features",
                names.len(),
                self.p
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Content hash used to detect evaluations computed on different data.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// A new dataset made of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(rows.len() * self.p);
        let mut targets = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        let mut out = Dataset::new(features, self.p, targets, self.task)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }
}

fn fingerprint(features: &[f64], targets: &[f64], p: usize) -> u64 {
    let mut h = DefaultHasher::new();
    p.hash(&mut h);
    targets.len().hash(&mut h);
    for v in features.iter().chain(targets) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}
