//! Estimators of the held-out performance of the split-0 model.
//!
//! - naive: the split-0 test estimate alone;
//! - cross-validation: the mean over all splits;
//! - empirical Bayes: the naive estimate shrunk toward the mean with a
//!   moment estimate of the between-split variance;
//! - hierarchical Bayes: the posterior mean of a Gibbs sampler over the
//!   normal random-effects model, with a posterior-quantile interval.

mod gibbs;
mod moments;
mod report;

pub use gibbs::{
    bayes_estimate, compound_shrinkage_matrix, credible_interval, gibbs_run, hazen_quantile,
    shrinkage_matrix, GibbsConfig, Hyperparameters, PosteriorChain, PriorSpec,
};
pub use moments::{cv_estimate, eb_combine, eb_estimate, naive_estimate, tau2_moment, Tau2Estimate};
pub use report::{
    full_report, full_report_with_chain, report_from_ensemble, CredibleInterval, Diagnostics,
    PerformanceReport, REPORT_SCHEMA_VERSION,
};
