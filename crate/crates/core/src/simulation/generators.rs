use rand::Rng;
use rand_distr::StandardNormal;

use super::SimConfig;
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Rows of iid standard normal features and the latent linear outcome
/// `beta0 . z + noise_sd * eps`.
fn latent_rows(cfg: &SimConfig, rng: &RngState) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng.rng();
    let mut features = Vec::with_capacity(cfg.n * cfg.p);
    let mut latent = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let start = features.len();
        features.extend((0..cfg.p).map(|_| r.sample::<f64, _>(StandardNormal)));
        let signal: f64 = features[start..].iter().zip(&cfg.beta0).map(|(z, b)| z * b).sum();
        let eps: f64 = r.sample(StandardNormal);
        latent.push(signal + cfg.noise_sd * eps);
    }
    (features, latent)
}

/// Continuous outcome `y = beta0 . z + noise_sd * eps`, `z ~ N(0, I_p)`.
pub fn gen_continuous(cfg: &SimConfig, rng: &RngState) -> Result<Dataset> {
    if cfg.task != Task::Continuous {
        return Err(Error::InvalidConfig("gen_continuous needs a continuous config".into()));
    }
    let (features, y) = latent_rows(cfg, rng);
    Dataset::new(features, cfg.p, y, Task::Continuous)
}

/// Binary outcome `y = 1{beta0 . z + noise_sd * eps > 0}`.
pub fn gen_binary(cfg: &SimConfig, rng: &RngState) -> Result<Dataset> {
    if cfg.task != Task::Binary {
        return Err(Error::InvalidConfig("gen_binary needs a binary config".into()));
    }
    let (features, latent) = latent_rows(cfg, rng);
    let y = latent.into_iter().map(|v| f64::from(v > 0.0)).collect();
    Dataset::new(features, cfg.p, y, Task::Binary)
}

/// Feature names of [`gen_benchmark_surrogate`].
pub const SURROGATE_FEATURES: [&str; 8] = [
    "hour", "workingday", "temp", "humidity", "windspeed", "season", "year", "noise",
];

/// A fixed nonlinear regression problem shaped like hourly rental counts:
/// commute peaks on working days, a midday hump otherwise, temperature and
/// humidity effects, and noise that grows with the mean. A linear learner
/// cannot represent it exactly.
pub fn gen_benchmark_surrogate(n: usize, rng: &RngState) -> Result<Dataset> {
    let mut r = rng.rng();
    let mut features = Vec::with_capacity(n * SURROGATE_FEATURES.len());
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let hour = r.random_range(0u32..24) as f64;
        let workingday = f64::from(r.random::<f64>() < 0.68);
        let season = r.random_range(1u32..5) as f64;
        let seasonal = ((season - 1.0) * std::f64::consts::FRAC_PI_2).cos();
        let temp = (0.5 - 0.25 * seasonal + 0.12 * r.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0);
        let humidity: f64 = r.random_range(0.15..1.0);
        let windspeed: f64 = r.random_range(0.0..0.6);
        let year = f64::from(r.random::<bool>());
        let noise: f64 = r.sample(StandardNormal);

        let commute = 230.0 * (-(hour - 8.0).powi(2) / 3.0).exp() + 280.0 * (-(hour - 17.5).powi(2) / 4.0).exp();
        let leisure = 190.0 * (-(hour - 14.0).powi(2) / 12.0).exp();
        let night = if !(6.0..=22.0).contains(&hour) { -40.0 } else { 0.0 };
        let mean = (30.0
            + workingday * commute
            + (1.0 - workingday) * leisure
            + 160.0 * temp
            - 90.0 * humidity * humidity
            - 40.0 * windspeed
            + 45.0 * year
            + night)
            .max(2.0);
        let eps: f64 = r.sample(StandardNormal);
        let count = (mean + (10.0 + 0.3 * mean) * eps).max(0.0).round();

        features.extend_from_slice(&[hour, workingday, temp, humidity, windspeed, season, year, noise]);
        y.push(count);
    }
    Dataset::new(features, SURROGATE_FEATURES.len(), y, Task::Continuous)?
        .with_feature_names(SURROGATE_FEATURES.iter().map(|s| s.to_string()).collect())
}
