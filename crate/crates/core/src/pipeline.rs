//! Fit-and-evaluate over a family of splits, the common inner loop of the
//! CLI and of the simulation harnesses.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Result, ResultExt};
use crate::estimators::{full_report_with_chain, GibbsConfig, PerformanceReport, PosteriorChain, PriorSpec};
use crate::learners::{Learner, Predictor};
use crate::metrics::{evaluate_cindex, evaluate_mspe, LossKind, SplitEvaluation};
use crate::rng::RngState;
use crate::split::{make_split_family, SplitPlan};

pub struct FamilyOutcome<M> {
    pub evaluations: Vec<SplitEvaluation>,
    /// The model trained on split 0, the one being evaluated.
    pub split0_model: M,
    /// Splits whose learner hit its iteration limit.
    pub nonconverged: Vec<usize>,
}

/// Fits the learner on every training set and scores it on the matching
/// test set (MSPE for continuous tasks, c-index for binary ones).
pub fn evaluate_family<L: Learner>(data: &Dataset, splits: &[SplitPlan], learner: &L) -> Result<FamilyOutcome<L::Model>> {
    let kind = LossKind::for_task(learner.task());
    let fitted: Vec<(SplitEvaluation, Option<L::Model>, bool)> = splits
        .par_iter()
        .map(|split| {
            let k = split.split_id();
            let model = learner.fit(data, split.train_indices()).stage("fit", Some(k))?;
            let eval = match kind {
                LossKind::Mspe => evaluate_mspe(&model, data, split),
                LossKind::Cindex => evaluate_cindex(&model, data, split),
            }
            .stage("evaluate", Some(k))?;
            let converged = model.converged();
            Ok((eval, (k == 0).then_some(model), converged))
        })
        .collect::<Result<_>>()?;

    let mut evaluations = Vec::with_capacity(fitted.len());
    let mut split0_model = None;
    let mut nonconverged = Vec::new();
    for (eval, model, converged) in fitted {
        if !converged {
            nonconverged.push(eval.split_id());
        }
        if model.is_some() {
            split0_model = model;
        }
        evaluations.push(eval);
    }
    Ok(FamilyOutcome {
        evaluations,
        split0_model: split0_model.expect("split family always contains split 0"),
        nonconverged,
    })
}

pub struct Evaluation<M> {
    pub report: PerformanceReport,
    pub chain: Option<PosteriorChain>,
    pub split0_model: M,
    pub splits: Vec<SplitPlan>,
}

/// The whole procedure on one dataset: draw `k + 1` splits with `n1`
/// training rows, fit and evaluate, then run every estimator.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_dataset<L: Learner>(
    data: &Dataset,
    n1: usize,
    k: usize,
    learner: &L,
    prior: &PriorSpec,
    gibbs: &GibbsConfig,
    alpha: f64,
    split_rng: &RngState,
) -> Result<Evaluation<L::Model>> {
    let splits = make_split_family(data.n(), n1, k, split_rng).stage("split", None)?;
    let outcome = evaluate_family(data, &splits, learner)?;
    let (mut report, chain) = full_report_with_chain(&outcome.evaluations, prior, gibbs, alpha)?;
    report.diagnostics.learner_nonconverged = outcome.nonconverged;
    Ok(Evaluation {
        report,
        chain,
        split0_model: outcome.split0_model,
        splits,
    })
}
