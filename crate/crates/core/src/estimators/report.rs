use serde::{Deserialize, Serialize};

use super::gibbs::{bayes_estimate, credible_interval, gibbs_run, GibbsConfig, PosteriorChain, PriorSpec};
use super::moments::{cv_estimate, eb_combine, naive_estimate, tau2_moment};
use crate::error::{Result, ResultExt};
use crate::metrics::{build_sigma, compound_symmetrize, EstimateEnsemble, LossKind, SplitEvaluation};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
}

impl CredibleInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Splits whose learner stopped at the iteration limit.
    pub learner_nonconverged: Vec<usize>,
    /// Eigenvalues of the sampler's covariance clamped to zero.
    pub clamped_eigenvalues: usize,
    pub gibbs_iterations: usize,
    pub burn_in: usize,
    pub notes: Vec<String>,
}

/// All four estimates for one split family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub schema_version: u32,
    pub loss_kind: LossKind,
    /// `K + 1`.
    pub splits: usize,
    pub naive: f64,
    pub cv: f64,
    /// `None` when there is only one split.
    pub eb: Option<f64>,
    /// `None` when there is only one split.
    pub bayes: Option<f64>,
    pub credible_interval: Option<CredibleInterval>,
    /// Cross-validation mean, the shrinkage target.
    pub mu_hat: f64,
    /// Variance of the naive estimate.
    pub naive_variance: f64,
    /// Between-split variance after clipping at zero.
    pub tau2_hat: Option<f64>,
    pub tau2_raw: Option<f64>,
    pub tau2_clipped: bool,
    pub diagnostics: Diagnostics,
}

/// Builds the covariance matrix from the evaluations and runs every estimator.
pub fn full_report(evals: &[SplitEvaluation], prior: &PriorSpec, cfg: &GibbsConfig, alpha: f64) -> Result<PerformanceReport> {
    full_report_with_chain(evals, prior, cfg, alpha).map(|(r, _)| r)
}

pub fn full_report_with_chain(
    evals: &[SplitEvaluation],
    prior: &PriorSpec,
    cfg: &GibbsConfig,
    alpha: f64,
) -> Result<(PerformanceReport, Option<PosteriorChain>)> {
    let raw = build_sigma(evals).stage("covariance", None)?;
    report_from_ensemble(&raw, prior, cfg, alpha)
}

/// Runs every estimator on an ensemble carrying the raw covariance. The
/// empirical-Bayes path uses the raw entries; the sampler uses the
/// compound-symmetric version.
pub fn report_from_ensemble(
    raw: &EstimateEnsemble,
    prior: &PriorSpec,
    cfg: &GibbsConfig,
    alpha: f64,
) -> Result<(PerformanceReport, Option<PosteriorChain>)> {
    prior.validate()?;
    cfg.validate()?;
    let naive = naive_estimate(raw);
    let cv = cv_estimate(raw);
    let naive_variance = raw.sigma()[(0, 0)];
    let mut report = PerformanceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        loss_kind: raw.loss_kind(),
        splits: raw.len(),
        naive,
        cv,
        eb: None,
        bayes: None,
        credible_interval: None,
        mu_hat: cv,
        naive_variance,
        tau2_hat: None,
        tau2_raw: None,
        tau2_clipped: false,
        diagnostics: Diagnostics {
            gibbs_iterations: cfg.iterations,
            burn_in: cfg.burn_in,
            ..Diagnostics::default()
        },
    };
    if raw.len() < 2 {
        report
            .diagnostics
            .notes
            .push("single split: empirical-Bayes and Bayes estimates unavailable".into());
        return Ok((report, None));
    }

    let tau2 = tau2_moment(raw).stage("tau2", None)?;
    report.tau2_hat = Some(tau2.value);
    report.tau2_raw = Some(tau2.raw);
    report.tau2_clipped = tau2.clipped;
    if tau2.clipped {
        report
            .diagnostics
            .notes
            .push("between-split variance estimate was negative and clipped to zero".into());
    }
    report.eb = Some(eb_combine(naive, naive_variance, cv, tau2.value).stage("empirical bayes", None)?);

    let cs = compound_symmetrize(raw)?;
    let chain = gibbs_run(&cs, prior, cfg).stage("gibbs", None)?;
    report.bayes = Some(bayes_estimate(&chain));
    let (lower, upper) = credible_interval(&chain, alpha).stage("credible interval", None)?;
    report.credible_interval = Some(CredibleInterval {
        lower,
        upper,
        level: 1.0 - alpha,
    });
    report.diagnostics.clamped_eigenvalues = chain.clamped_eigenvalues();
    Ok((report, Some(chain)))
}
