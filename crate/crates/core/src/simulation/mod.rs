//! Simulation studies and the large-holdout benchmark.
//!
//! A study repeatedly generates data from a known linear model, runs the
//! full estimation procedure, and scores every estimator against the exact
//! (continuous) or Monte-Carlo (binary) performance of the split-0 model.
//! The benchmark does the same on a fixed dataset, using a large held-out
//! part of the data as ground truth.

mod generators;
mod study;
mod truth;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::estimators::{GibbsConfig, PriorSpec};
use crate::learners::{LearnerSpec, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::RngState;

pub use generators::{gen_binary, gen_continuous, gen_benchmark_surrogate};
pub use study::{
    run_benchmark, run_benchmark_with, run_replicate, run_study, EstimatorErrors, RepFailure, RepResult, RepRow,
    StudySummary, SummaryKind, SUMMARY_SCHEMA_VERSION,
};
pub use truth::{true_cindex, true_mspe, CindexTruth};

/// Default test-set sizes for studies with `n = 150`.
pub const DEFAULT_N2_GRID: [usize; 5] = [30, 50, 75, 100, 120];

/// Default Monte-Carlo sample size for the true c-index.
pub const DEFAULT_MC_N: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub task: Task,
    pub n: usize,
    pub p: usize,
    pub beta0: Vec<f64>,
    pub noise_sd: f64,
    pub n1: usize,
    pub k: usize,
    pub lambda: f64,
    pub reps: usize,
    pub prior: PriorSpec,
    /// Sampler settings; its stream is replaced per replication.
    pub gibbs: GibbsConfig,
    pub alpha: f64,
    pub seed: RngState,
    pub mc_n: usize,
    pub learner_max_iter: usize,
    pub learner_tol: f64,
}

impl SimConfig {
    /// `n = 150`, `p = 50`, four active coefficients of 0.5, unit noise,
    /// `K = 39`, lasso penalty 0.10, 299 replications.
    pub fn continuous(n1: usize, seed: u64) -> Self {
        let p = 50;
        let mut beta0 = vec![0.0; p];
        beta0[..4].fill(0.5);
        SimConfig {
            task: Task::Continuous,
            n: 150,
            p,
            beta0,
            noise_sd: 1.0,
            n1,
            k: 39,
            lambda: 0.10,
            reps: 299,
            prior: PriorSpec::default(),
            gibbs: GibbsConfig::default(),
            alpha: 0.05,
            seed: RngState::new(seed),
            mc_n: DEFAULT_MC_N,
            learner_max_iter: DEFAULT_MAX_ITER,
            learner_tol: DEFAULT_TOL,
        }
    }

    /// As [`SimConfig::continuous`] with a thresholded outcome and penalty 0.13.
    pub fn binary(n1: usize, seed: u64) -> Self {
        SimConfig {
            task: Task::Binary,
            lambda: 0.13,
            ..SimConfig::continuous(n1, seed)
        }
    }

    pub fn for_task(task: Task, n1: usize, seed: u64) -> Self {
        match task {
            Task::Continuous => SimConfig::continuous(n1, seed),
            Task::Binary => SimConfig::binary(n1, seed),
        }
    }

    pub fn n2(&self) -> usize {
        self.n.saturating_sub(self.n1)
    }

    pub fn learner(&self) -> LearnerSpec {
        LearnerSpec {
            max_iter: self.learner_max_iter,
            tol: self.learner_tol,
            ..LearnerSpec::for_task(self.task, self.lambda)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 1 || self.n1 + 2 > self.n {
            return Err(Error::InvalidSizes { n: self.n, n1: self.n1 });
        }
        if self.reps < 1 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        if self.beta0.len() != self.p {
            return Err(Error::InvalidConfig(format!(
                "beta0 has {} entries for p = {}",
                self.beta0.len(),
                self.p
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig("noise_sd must be >= 0".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.task == Task::Binary && self.mc_n < 2 {
            return Err(Error::InvalidConfig("mc_n must be >= 2".into()));
        }
        self.prior.validate()?;
        self.gibbs.validate()?;
        self.learner().validate()
    }
}
