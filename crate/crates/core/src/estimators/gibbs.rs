//! Gibbs sampler for the normal random-effects model
//!
//! ```text
//! Err_k ~ N(mu, tau2)                 k = 0..K
//! est | Err ~ N(Err, Sigma)           Sigma known
//! 1/tau2 ~ Gamma(a0, b0),  mu | tau2 ~ N(0, tau2 / kappa0)
//! ```
//!
//! Each iteration draws the true performances given `(mu, tau2)` and then
//! `(tau2, mu)` given the true performances. With
//! `B = tau2 (tau2 I + Sigma)^-1` the first conditional is
//! `N(mu 1 + B (est - mu 1), B Sigma)`. Both `B` and the covariance are
//! diagonal in the eigenbasis of `Sigma`, so `Sigma` is decomposed once and
//! negative eigenvalues are clamped to zero. For a compound-symmetric
//! `Sigma` the eigenbasis is the all-ones direction plus its orthogonal
//! complement and every draw costs `O(K)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::moments::{cv_estimate, tau2_moment};
use crate::error::{Error, Result};
use crate::metrics::EstimateEnsemble;
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub a0: f64,
    pub b0: f64,
    pub kappa0: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            a0: 0.01,
            b0: 0.01,
            kappa0: 1e-4,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a0", self.a0), ("b0", self.b0), ("kappa0", self.kappa0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("prior {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Values that stay fixed when only the first conditional is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub mu: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Total iterations `M`.
    pub iterations: usize,
    /// Leading draws discarded, `M0`.
    pub burn_in: usize,
    pub rng: RngState,
    /// When set, `(mu, tau2)` are held at these values and only the true
    /// performances are sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_hyperparameters: Option<Hyperparameters>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 10_000,
            burn_in: 2_000,
            rng: RngState::new(0),
            fixed_hyperparameters: None,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if let Some(h) = self.fixed_hyperparameters {
            if !(h.tau2 > 0.0 && h.tau2.is_finite() && h.mu.is_finite()) {
                return Err(Error::InvalidConfig("fixed tau2 must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

/// Every draw of the chain, burn-in included.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    dim: usize,
    /// Row-major `iterations x dim`.
    err_draws: Vec<f64>,
    mu_draws: Vec<f64>,
    tau2_draws: Vec<f64>,
    burn_in: usize,
    clamped_eigenvalues: usize,
}

impl PosteriorChain {
    /// Assembles a chain from stored draws.
    pub fn from_draws(dim: usize, err_draws: Vec<f64>, mu_draws: Vec<f64>, tau2_draws: Vec<f64>, burn_in: usize) -> Result<Self> {
        let m = mu_draws.len();
        if dim == 0 || err_draws.len() != m * dim || tau2_draws.len() != m || burn_in >= m {
            return Err(Error::InvalidConfig("inconsistent chain dimensions".into()));
        }
        if tau2_draws.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::NumericalFailure("non-positive tau2 draw".into()));
        }
        Ok(PosteriorChain {
            dim,
            err_draws,
            mu_draws,
            tau2_draws,
            burn_in,
            clamped_eigenvalues: 0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.mu_draws.len()
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// Number of splits, `K + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn err_draw(&self, m: usize) -> &[f64] {
        &self.err_draws[m * self.dim..(m + 1) * self.dim]
    }

    pub fn mu_draws(&self) -> &[f64] {
        &self.mu_draws
    }

    pub fn tau2_draws(&self) -> &[f64] {
        &self.tau2_draws
    }

    /// Post-burn-in draws of the split-`k` performance.
    pub fn retained(&self, k: usize) -> Vec<f64> {
        (self.burn_in..self.iterations()).map(|m| self.err_draws[m * self.dim + k]).collect()
    }

    /// Negative eigenvalues of the noise covariance that were set to zero.
    pub fn clamped_eigenvalues(&self) -> usize {
        self.clamped_eigenvalues
    }

    /// Writes the chain as comma-separated columns
    /// `iteration,retained,mu,tau2,err_0,..,err_K`.
    pub fn write_columnar<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "iteration,retained,mu,tau2")?;
        for k in 0..self.dim {
            write!(w, ",err_{k}")?;
        }
        writeln!(w)?;
        for m in 0..self.iterations() {
            write!(
                w,
                "{m},{},{:?},{:?}",
                u8::from(m >= self.burn_in),
                self.mu_draws[m],
                self.tau2_draws[m]
            )?;
            for v in self.err_draw(m) {
                write!(w, ",{v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Spectral form of the noise covariance.
enum NoiseSpectrum {
    /// Eigenvalue on the all-ones direction and on its complement.
    Compound { along_ones: f64, orthogonal: f64 },
    General { vectors: DMatrix<f64>, values: Vec<f64> },
}

impl NoiseSpectrum {
    /// The spectrum with negative eigenvalues clamped to zero, and the
    /// number of eigenvalues (with multiplicity) that were clamped.
    fn new(ensemble: &EstimateEnsemble) -> Result<(Self, usize)> {
        let d = ensemble.len();
        if let Some((diag, off)) = ensemble.compound_symmetry() {
            let along_ones = diag + (d - 1) as f64 * off;
            let orthogonal = diag - off;
            let clamped = usize::from(along_ones < 0.0) + if orthogonal < 0.0 { d - 1 } else { 0 };
            let spectrum = NoiseSpectrum::Compound {
                along_ones: along_ones.max(0.0),
                orthogonal: orthogonal.max(0.0),
            };
            return Ok((spectrum, clamped));
        }
        let s = ensemble.sigma();
        let sym = (s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("eigen-decomposition of the covariance failed".into()));
        }
        let clamped = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
        let values = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        Ok((
            NoiseSpectrum::General {
                vectors: eig.eigenvectors,
                values,
            },
            clamped,
        ))
    }
}

/// Per-eigenvalue pull toward `mu`, `lambda / (tau2 + lambda)` (that is
/// `1 - b` for the shrinkage factor `b`), and conditional standard deviation
/// `sqrt(tau2 * lambda / (tau2 + lambda))`.
fn shrink(tau2: f64, lambda: f64) -> (f64, f64) {
    let pull = lambda / (tau2 + lambda);
    (pull, (tau2 * pull).sqrt())
}

/// Draws the true performances given `(mu, tau2)` into `out`, written as
/// `est - (I - B)(est - mu 1) + noise` so that zero noise returns `est` exactly.
fn draw_effects(spectrum: &NoiseSpectrum, est: &[f64], mu: f64, tau2: f64, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
    let d = est.len();
    for zi in z.iter_mut() {
        *zi = rng.sample(StandardNormal);
    }
    match spectrum {
        NoiseSpectrum::Compound { along_ones, orthogonal } => {
            let (c1, s1) = shrink(tau2, *along_ones);
            let (c2, s2) = shrink(tau2, *orthogonal);
            let dev_mean = est.iter().map(|e| e - mu).sum::<f64>() / d as f64;
            let z_mean = z.iter().sum::<f64>() / d as f64;
            for k in 0..d {
                let dev = est[k] - mu;
                out[k] = est[k] - c1 * dev_mean - c2 * (dev - dev_mean) + s1 * z_mean + s2 * (z[k] - z_mean);
            }
        }
        NoiseSpectrum::General { vectors, values } => {
            let mut coef = vec![0.0; d];
            for (i, c) in coef.iter_mut().enumerate() {
                let proj: f64 = (0..d).map(|k| vectors[(k, i)] * (est[k] - mu)).sum();
                let (pull, sd) = shrink(tau2, values[i]);
                *c = sd * z[i] - pull * proj;
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o = est[k] + (0..d).map(|i| vectors[(k, i)] * coef[i]).sum::<f64>();
            }
        }
    }
}

/// Runs the sampler. `ensemble` should carry the covariance to be treated
/// as known (normally its compound-symmetric version).
pub fn gibbs_run(ensemble: &EstimateEnsemble, prior: &PriorSpec, cfg: &GibbsConfig) -> Result<PosteriorChain> {
    prior.validate()?;
    cfg.validate()?;
    let d = ensemble.len();
    if d < 2 {
        return Err(Error::TooFewSplits { needed: 2, got: d });
    }
    let (spectrum, clamped_eigenvalues) = NoiseSpectrum::new(ensemble)?;
    let est = ensemble.estimates();
    let dn = d as f64;

    let (mut mu, mut tau2) = match cfg.fixed_hyperparameters {
        Some(h) => (h.mu, h.tau2),
        None => {
            let mu_hat = cv_estimate(ensemble);
            let t = tau2_moment(ensemble)?.value;
            (mu_hat, t.max(1e-8 * mu_hat * mu_hat + 1e-12))
        }
    };

    let m_total = cfg.iterations;
    let mut rng = cfg.rng.rng();
    let mut err_draws = vec![0.0; m_total * d];
    let mut mu_draws = Vec::with_capacity(m_total);
    let mut tau2_draws = Vec::with_capacity(m_total);
    let mut z = vec![0.0; d];
    let a1 = prior.a0 + dn / 2.0;
    let kappa1 = prior.kappa0 + dn;

    for m in 0..m_total {
        let row = &mut err_draws[m * d..(m + 1) * d];
        draw_effects(&spectrum, est, mu, tau2, &mut rng, &mut z, row);

        if cfg.fixed_hyperparameters.is_none() {
            let mean = row.iter().sum::<f64>() / dn;
            let ss: f64 = row.iter().map(|e| (e - mean) * (e - mean)).sum();
            let mu1 = dn * mean / kappa1;
            let b1 = prior.b0 + 0.5 * ss + prior.kappa0 * dn / (2.0 * kappa1) * mean * mean;
            let gamma = Gamma::new(a1, 1.0 / b1)
                .map_err(|e| Error::NumericalFailure(format!("gamma({a1}, rate {b1}) at iteration {m}: {e}")))?;
            let precision: f64 = gamma.sample(&mut rng);
            tau2 = 1.0 / precision;
            if !(tau2 > 0.0 && tau2.is_finite()) {
                return Err(Error::NumericalFailure(format!("tau2 draw {tau2} at iteration {m}")));
            }
            let zmu: f64 = rng.sample(StandardNormal);
            mu = mu1 + (tau2 / kappa1).sqrt() * zmu;
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite draw at iteration {m}")));
        }
        mu_draws.push(mu);
        tau2_draws.push(tau2);
    }

    Ok(PosteriorChain {
        dim: d,
        err_draws,
        mu_draws,
        tau2_draws,
        burn_in: cfg.burn_in,
        clamped_eigenvalues,
    })
}

/// `B = tau2 (tau2 I + Sigma)^-1` by a direct linear solve.
pub fn shrinkage_matrix(sigma: &DMatrix<f64>, tau2: f64) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    let a = sigma + DMatrix::identity(d, d) * tau2;
    let rhs = DMatrix::identity(d, d) * tau2;
    a.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("tau2 I + Sigma is singular".into()))
}

/// `B` for a compound-symmetric `Sigma` with the given diagonal and
/// off-diagonal values, from its two eigenvalues.
pub fn compound_shrinkage_matrix(dim: usize, diag: f64, off: f64, tau2: f64) -> DMatrix<f64> {
    let d = dim as f64;
    let b_ones = tau2 / (tau2 + diag + (d - 1.0) * off);
    let b_orth = tau2 / (tau2 + diag - off);
    DMatrix::from_fn(dim, dim, |i, j| {
        let proj = 1.0 / d;
        if i == j {
            b_ones * proj + b_orth * (1.0 - proj)
        } else {
            (b_ones - b_orth) * proj
        }
    })
}

/// Posterior mean of the split-0 performance: the average of its
/// post-burn-in draws.
pub fn bayes_estimate(chain: &PosteriorChain) -> f64 {
    let kept = chain.iterations() - chain.burn_in;
    (chain.burn_in..chain.iterations())
        .map(|m| chain.err_draws[m * chain.dim])
        .sum::<f64>()
        / kept as f64
}

/// Minimum number of retained draws for an interval.
pub const MIN_RETAINED_DRAWS: usize = 40;

/// Equal-tailed `1 - alpha` posterior interval for the split-0
/// performance, from the `alpha/2` and `1 - alpha/2` quantiles of the
/// retained draws (see [`hazen_quantile`]).
pub fn credible_interval(chain: &PosteriorChain, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mut draws = chain.retained(0);
    if draws.len() < MIN_RETAINED_DRAWS {
        return Err(Error::InsufficientDraws {
            needed: MIN_RETAINED_DRAWS,
            got: draws.len(),
        });
    }
    draws.sort_by(f64::total_cmp);
    Ok((hazen_quantile(&draws, alpha / 2.0), hazen_quantile(&draws, 1.0 - alpha / 2.0)))
}

/// Quantile of sorted data by linear interpolation between order
/// statistics, placing the `i`-th of `n` values (1-based) at probability
/// `(i - 0.5) / n`. Values beyond the outer order statistics are clamped.
pub fn hazen_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = n as f64 * p + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let i = lo as usize;
    sorted[i - 1] + (h - lo) * (sorted[i] - sorted[i - 1])
}
