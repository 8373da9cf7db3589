//! Estimating the out-of-sample performance of one specific trained model.
//!
//! A model is trained on a designated training set (split 0) and scored on
//! its held-out test set, which gives the naive estimate. Additional random
//! train/test splits of the same data give ordinary cross-validation
//! estimates. Treating the true per-split performances as draws from a normal
//! random-effects distribution, the naive estimate is shrunk toward the
//! cross-validation mean, either by a Gibbs sampler over the full hierarchical
//! model or by a plug-in empirical-Bayes rule.
//!
//! Module map:
//!
//! - [`data`], [`rng`], [`split`]: datasets, reproducible random streams and
//!   repeated random splits.
//! - [`learners`]: the learner contract plus lasso linear and lasso logistic
//!   regression fitted by coordinate descent.
//! - [`metrics`]: per-split loss estimates (MSPE, c-index) and the covariance
//!   matrix between splits with overlapping test sets.
//! - [`estimators`]: naive, cross-validation, empirical-Bayes and Gibbs
//!   estimators, credible intervals and the combined report.
//! - [`simulation`]: data generators, ground truth and replication harnesses.
//! - [`cli`]: the `cvshrink` command-line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simulation;
pub mod split;

pub use data::{Dataset, Task};
pub use error::{Error, ErrorClass, Result};
pub use estimators::{
    bayes_estimate, credible_interval, cv_estimate, eb_estimate, full_report, gibbs_run,
    naive_estimate, tau2_moment, GibbsConfig, PerformanceReport, PosteriorChain, PriorSpec,
};
pub use learners::{Learner, LearnerKind, LearnerSpec, LinearModel, Predictor};
pub use metrics::{
    build_sigma, cindex_covariance, compound_symmetrize, evaluate_cindex, evaluate_mspe,
    mspe_covariance, EstimateEnsemble, LossKind, SplitEvaluation,
};
pub use rng::RngState;
pub use split::{make_split, make_split_family, SplitPlan};
