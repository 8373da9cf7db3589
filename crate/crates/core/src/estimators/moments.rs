use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EstimateEnsemble;

/// The split-0 estimate.
pub fn naive_estimate(ensemble: &EstimateEnsemble) -> f64 {
    ensemble.estimates()[0]
}

/// Mean of all split estimates (the usual random-split cross-validation estimate).
pub fn cv_estimate(ensemble: &EstimateEnsemble) -> f64 {
    let e = ensemble.estimates();
    e.iter().sum::<f64>() / e.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau2Estimate {
    /// The estimate after clipping at zero.
    pub value: f64,
    /// The unclipped moment estimate.
    pub raw: f64,
    /// True when `raw < 0` and `value` was set to zero.
    pub clipped: bool,
}

/// Pairwise moment estimate of the between-split variance:
///
/// ```text
/// tau2 = 1/(K(K+1)) * sum_{i<j} [ (e_i - e_j)^2 - s_ii - s_jj + 2 s_ij ]
/// ```
///
/// Negative values are clipped to zero.
pub fn tau2_moment(ensemble: &EstimateEnsemble) -> Result<Tau2Estimate> {
    let d = ensemble.len();
    if d < 2 {
        return Err(Error::TooFewSplits { needed: 2, got: d });
    }
    let e = ensemble.estimates();
    let s = ensemble.sigma();
    let mut sum = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let diff = e[i] - e[j];
            sum += diff * diff - s[(i, i)] - s[(j, j)] + 2.0 * s[(i, j)];
        }
    }
    let raw = sum / (d as f64 * (d - 1) as f64);
    let clipped = raw < 0.0;
    Ok(Tau2Estimate {
        value: if clipped { 0.0 } else { raw },
        raw,
        clipped,
    })
}

/// Normal-normal posterior mean of the split-0 performance given its
/// estimate `naive` with variance `naive_var`, under a `N(mu, tau2)` prior.
pub fn eb_combine(naive: f64, naive_var: f64, mu: f64, tau2: f64) -> Result<f64> {
    if tau2 == 0.0 {
        if naive_var == 0.0 {
            return Err(Error::DegenerateVariance);
        }
        return Ok(mu);
    }
    let w = tau2 / (tau2 + naive_var);
    Ok(w * naive + (1.0 - w) * mu)
}

/// Empirical-Bayes estimate: precision-weighted average of the naive
/// estimate and the cross-validation mean, using the split-0 variance from
/// the ensemble's covariance and the moment estimate of the between-split
/// variance. Falls back to the cross-validation mean when that estimate is
/// clipped to zero.
pub fn eb_estimate(ensemble: &EstimateEnsemble) -> Result<f64> {
    let tau2 = tau2_moment(ensemble)?;
    eb_combine(
        naive_estimate(ensemble),
        ensemble.sigma()[(0, 0)],
        cv_estimate(ensemble),
        tau2.value,
    )
}
