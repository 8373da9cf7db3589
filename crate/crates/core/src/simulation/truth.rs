use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::LinearModel;
use crate::metrics::cindex_with_variance;
use crate::rng::RngState;

fn check_dim(model: &LinearModel, beta0: &[f64]) -> Result<()> {
    if model.coefficients.len() != beta0.len() {
        return Err(Error::DimensionMismatch {
            expected: beta0.len(),
            got: model.coefficients.len(),
        });
    }
    Ok(())
}

/// Exact expected squared error of a linear predictor on a fresh draw from
/// the continuous generator: `alpha^2 + ||beta - beta0||^2 + noise_sd^2`.
pub fn true_mspe(model: &LinearModel, beta0: &[f64], noise_sd: f64) -> Result<f64> {
    check_dim(model, beta0)?;
    let bias: f64 = model.coefficients.iter().zip(beta0).map(|(b, t)| (b - t) * (b - t)).sum();
    Ok(model.intercept * model.intercept + bias + noise_sd * noise_sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CindexTruth {
    pub value: f64,
    /// Monte-Carlo standard error.
    pub std_error: f64,
    /// Every simulated score was identical (a constant model); the strict
    /// pair indicator then gives 0.
    pub all_tied: bool,
}

/// Monte-Carlo c-index of a linear score on `mc_n` fresh draws from the
/// binary generator.
///
/// Only the model score `beta . z` and the signal `beta0 . z` matter, and
/// for `z ~ N(0, I)` they are jointly normal with variances `||beta||^2`,
/// `||beta0||^2` and covariance `beta . beta0`, so each draw samples that
/// pair directly instead of a full feature vector.
pub fn true_cindex(model: &LinearModel, beta0: &[f64], noise_sd: f64, mc_n: usize, rng: &RngState) -> Result<CindexTruth> {
    check_dim(model, beta0)?;
    let score_var: f64 = model.coefficients.iter().map(|b| b * b).sum();
    let signal_var: f64 = beta0.iter().map(|b| b * b).sum();
    let cross: f64 = model.coefficients.iter().zip(beta0).map(|(b, t)| b * t).sum();
    let score_sd = score_var.sqrt();
    let (load, resid_sd) = if score_sd > 0.0 {
        let load = cross / score_sd;
        (load, (signal_var - load * load).max(0.0).sqrt())
    } else {
        (0.0, signal_var.sqrt())
    };

    let mut r = rng.rng();
    let mut scores = Vec::with_capacity(mc_n);
    let mut positive = Vec::with_capacity(mc_n);
    for _ in 0..mc_n {
        let u1: f64 = r.sample(StandardNormal);
        let u2: f64 = r.sample(StandardNormal);
        let eps: f64 = r.sample(StandardNormal);
        let signal = load * u1 + resid_sd * u2;
        scores.push(model.intercept + score_sd * u1);
        positive.push(signal + noise_sd * eps > 0.0);
    }
    let all_tied = scores.iter().all(|&s| s == scores[0]);
    let (value, var) = cindex_with_variance(&scores, &positive).map_err(|e| match e {
        Error::DegenerateTestSet { negatives, positives } => Error::DegenerateClasses(format!(
            "{negatives} negatives and {positives} positives in {mc_n} draws"
        )),
        other => other,
    })?;
    Ok(CindexTruth {
        value,
        std_error: var.sqrt(),
        all_tied,
    })
}
