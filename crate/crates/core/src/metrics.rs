//! Per-split performance estimates and their joint covariance.
//!
//! Each [`SplitEvaluation`] keeps the per-observation quantities needed to
//! form covariances with any other split without refitting: squared-error
//! losses for MSPE, and class-wise placement values for the c-index. For a
//! negative `i` the placement is the share of positives scored strictly
//! above it; for a positive `j` it is the share of negatives scored strictly
//! below it. The c-index itself is the mean placement of either class.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::learners::Predictor;
use crate::split::SplitPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mspe,
    Cindex,
}

impl LossKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Continuous => LossKind::Mspe,
            Task::Binary => LossKind::Cindex,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvaluation {
    split: SplitPlan,
    dataset: u64,
    kind: LossKind,
    /// Aligned with `split.test_indices()`.
    scores: Vec<f64>,
    /// Squared errors (MSPE) or placement values (c-index), aligned with the test indices.
    contributions: Vec<f64>,
    /// Class of each test row (c-index only).
    positive: Vec<bool>,
    class_counts: Option<(usize, usize)>,
    err_hat: f64,
    var_hat: f64,
}

impl SplitEvaluation {
    pub fn split(&self) -> &SplitPlan {
        &self.split
    }

    pub fn split_id(&self) -> usize {
        self.split.split_id()
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Per-observation squared errors; `None` for c-index evaluations.
    pub fn losses(&self) -> Option<&[f64]> {
        (self.kind == LossKind::Mspe).then_some(&self.contributions[..])
    }

    /// Per-observation placement values; `None` for MSPE evaluations.
    pub fn placements(&self) -> Option<&[f64]> {
        (self.kind == LossKind::Cindex).then_some(&self.contributions[..])
    }

    /// `(negatives, positives)` in the test set, for c-index evaluations.
    pub fn class_counts(&self) -> Option<(usize, usize)> {
        self.class_counts
    }

    pub fn err_hat(&self) -> f64 {
        self.err_hat
    }

    pub fn var_hat(&self) -> f64 {
        self.var_hat
    }

    pub fn dataset_fingerprint(&self) -> u64 {
        self.dataset
    }
}

fn test_scores<P: Predictor + ?Sized>(model: &P, data: &Dataset, split: &SplitPlan) -> Result<Vec<f64>> {
    if model.n_features() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: data.p(),
        });
    }
    if split.n() != data.n() {
        return Err(Error::MismatchedData(format!(
            "split covers {} rows, dataset has {}",
            split.n(),
            data.n()
        )));
    }
    let scores: Vec<f64> = split.test_indices().iter().map(|&i| model.score(data.row(i))).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite prediction on split {}",
            split.split_id()
        )));
    }
    Ok(scores)
}

/// Mean squared prediction error on the split's test set, with variance
/// `(1/n2^2) * sum (loss_i - err_hat)^2`.
pub fn evaluate_mspe<P: Predictor + ?Sized>(model: &P, data: &Dataset, split: &SplitPlan) -> Result<SplitEvaluation> {
    let scores = test_scores(model, data, split)?;
    Ok(mspe_from_scores(split.clone(), data, scores))
}

/// MSPE evaluation from already computed test-set predictions (aligned with
/// the split's test indices).
pub fn mspe_from_scores(split: SplitPlan, data: &Dataset, scores: Vec<f64>) -> SplitEvaluation {
    let losses: Vec<f64> = split
        .test_indices()
        .iter()
        .zip(&scores)
        .map(|(&i, s)| {
            let r = data.target(i) - s;
            r * r
        })
        .collect();
    let err_hat = losses.iter().sum::<f64>() / losses.len() as f64;
    let mut eval = SplitEvaluation {
        split,
        dataset: data.fingerprint(),
        kind: LossKind::Mspe,
        scores,
        contributions: losses,
        positive: Vec::new(),
        class_counts: None,
        err_hat,
        var_hat: 0.0,
    };
    eval.var_hat = mspe_cov_unchecked(&eval, &eval);
    eval
}

/// Empirical c-index `(1/(m0 m1)) * #{(i neg, j pos): score_i < score_j}`.
/// Ties count as discordant.
pub fn evaluate_cindex<P: Predictor + ?Sized>(model: &P, data: &Dataset, split: &SplitPlan) -> Result<SplitEvaluation> {
    if data.task() != Task::Binary {
        return Err(Error::InvalidConfig("c-index needs a binary task".into()));
    }
    let scores = test_scores(model, data, split)?;
    cindex_from_scores(split.clone(), data, scores)
}

pub fn cindex_from_scores(split: SplitPlan, data: &Dataset, scores: Vec<f64>) -> Result<SplitEvaluation> {
    let positive: Vec<bool> = split.test_indices().iter().map(|&i| data.target(i) == 1.0).collect();
    let (placements, concordant, m0, m1) = placements(&scores, &positive)?;
    let mut eval = SplitEvaluation {
        split,
        dataset: data.fingerprint(),
        kind: LossKind::Cindex,
        scores,
        contributions: placements,
        positive,
        class_counts: Some((m0, m1)),
        err_hat: concordant as f64 / (m0 as f64 * m1 as f64),
        var_hat: 0.0,
    };
    eval.var_hat = cindex_cov_unchecked(&eval, &eval);
    Ok(eval)
}

/// Placement values plus the concordant pair count and class sizes.
fn placements(scores: &[f64], positive: &[bool]) -> Result<(Vec<f64>, u64, usize, usize)> {
    let mut neg: Vec<f64> = Vec::new();
    let mut pos: Vec<f64> = Vec::new();
    for (&s, &is_pos) in scores.iter().zip(positive) {
        if is_pos {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    let (m0, m1) = (neg.len(), pos.len());
    if m0 == 0 || m1 == 0 {
        return Err(Error::DegenerateTestSet {
            negatives: m0,
            positives: m1,
        });
    }
    neg.sort_by(f64::total_cmp);
    pos.sort_by(f64::total_cmp);
    let mut concordant = 0u64;
    let values = scores
        .iter()
        .zip(positive)
        .map(|(&s, &is_pos)| {
            if is_pos {
                let below = neg.partition_point(|&v| v < s);
                concordant += below as u64;
                below as f64 / m0 as f64
            } else {
                let above = m1 - pos.partition_point(|&v| v <= s);
                above as f64 / m1 as f64
            }
        })
        .collect();
    Ok((values, concordant, m0, m1))
}

/// Empirical c-index of raw scores and labels together with its
/// U-statistic variance (the self-covariance used for a split evaluation).
pub fn cindex_with_variance(scores: &[f64], positive: &[bool]) -> Result<(f64, f64)> {
    let (values, concordant, m0, m1) = placements(scores, positive)?;
    let auc = concordant as f64 / (m0 as f64 * m1 as f64);
    let (mut neg_ss, mut pos_ss) = (0.0, 0.0);
    for (v, &is_pos) in values.iter().zip(positive) {
        let c = (v - auc) * (v - auc);
        if is_pos {
            pos_ss += c;
        } else {
            neg_ss += c;
        }
    }
    Ok((auc, neg_ss / (m0 as f64 * m0 as f64) + pos_ss / (m1 as f64 * m1 as f64)))
}

/// Positions `(a, b)` of the test indices shared by two ascending lists.
fn shared_positions<'a>(a: &'a [usize], b: &'a [usize]) -> impl Iterator<Item = (usize, usize)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let out = (i, j);
                    i += 1;
                    j += 1;
                    return Some(out);
                }
            }
        }
        None
    })
}

fn check_pair(a: &SplitEvaluation, b: &SplitEvaluation, kind: LossKind) -> Result<()> {
    if a.dataset != b.dataset {
        return Err(Error::MismatchedData(format!(
            "splits {} and {} were evaluated on different datasets",
            a.split_id(),
            b.split_id()
        )));
    }
    if a.kind != kind || b.kind != kind {
        return Err(Error::MismatchedData(format!(
            "expected {kind:?} evaluations, got {:?} and {:?}",
            a.kind, b.kind
        )));
    }
    Ok(())
}

/// Covariance of two MSPE estimates:
/// `(1/n2^2) * sum over shared test rows of (loss_k - err_k)(loss_l - err_l)`.
pub fn mspe_covariance(a: &SplitEvaluation, b: &SplitEvaluation) -> Result<f64> {
    check_pair(a, b, LossKind::Mspe)?;
    if a.split.n2() != b.split.n2() {
        return Err(Error::MismatchedData(format!(
            "test sizes differ: {} vs {}",
            a.split.n2(),
            b.split.n2()
        )));
    }
    Ok(mspe_cov_unchecked(a, b))
}

fn mspe_cov_unchecked(a: &SplitEvaluation, b: &SplitEvaluation) -> f64 {
    let n2 = a.split.n2() as f64;
    let sum: f64 = shared_positions(a.split.test_indices(), b.split.test_indices())
        .map(|(i, j)| (a.contributions[i] - a.err_hat) * (b.contributions[j] - b.err_hat))
        .sum();
    sum / (n2 * n2)
}

/// U-statistic covariance of two c-index estimates: a term over shared
/// negatives plus a term over shared positives, each summing products of
/// centred placement values scaled by the class sizes of both splits.
pub fn cindex_covariance(a: &SplitEvaluation, b: &SplitEvaluation) -> Result<f64> {
    check_pair(a, b, LossKind::Cindex)?;
    Ok(cindex_cov_unchecked(a, b))
}

fn cindex_cov_unchecked(a: &SplitEvaluation, b: &SplitEvaluation) -> f64 {
    let (a0, a1) = a.class_counts.expect("c-index evaluation has class counts");
    let (b0, b1) = b.class_counts.expect("c-index evaluation has class counts");
    let mut neg_sum = 0.0;
    let mut pos_sum = 0.0;
    for (i, j) in shared_positions(a.split.test_indices(), b.split.test_indices()) {
        let term = (a.contributions[i] - a.err_hat) * (b.contributions[j] - b.err_hat);
        if a.positive[i] {
            pos_sum += term;
        } else {
            neg_sum += term;
        }
    }
    neg_sum / (a0 as f64 * b0 as f64) + pos_sum / (a1 as f64 * b1 as f64)
}

/// Covariance for whichever loss both evaluations use.
pub fn covariance(a: &SplitEvaluation, b: &SplitEvaluation) -> Result<f64> {
    match a.kind {
        LossKind::Mspe => mspe_covariance(a, b),
        LossKind::Cindex => cindex_covariance(a, b),
    }
}

/// The estimate vector `(err_0, .., err_K)` with its covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateEnsemble {
    estimates: Vec<f64>,
    sigma: DMatrix<f64>,
    loss_kind: LossKind,
}

impl EstimateEnsemble {
    /// Checks that `sigma` is square, symmetric, matches `estimates` and has
    /// a non-negative diagonal.
    pub fn new(estimates: Vec<f64>, sigma: DMatrix<f64>, loss_kind: LossKind) -> Result<Self> {
        let d = estimates.len();
        if d == 0 {
            return Err(Error::TooFewSplits { needed: 1, got: 0 });
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::MismatchedData(format!(
                "covariance is {}x{}, estimates have length {d}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if estimates.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite estimate or covariance entry".into()));
        }
        for i in 0..d {
            if sigma[(i, i)] < 0.0 {
                return Err(Error::MismatchedData(format!("negative variance at {i}")));
            }
            for j in 0..i {
                if sigma[(i, j)] != sigma[(j, i)] {
                    return Err(Error::MismatchedData(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(EstimateEnsemble {
            estimates,
            sigma,
            loss_kind,
        })
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    /// `K + 1`.
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// `Some((diag, off))` when every diagonal entry equals `diag` and every
    /// off-diagonal entry equals `off`.
    pub fn compound_symmetry(&self) -> Option<(f64, f64)> {
        let d = self.len();
        let diag = self.sigma[(0, 0)];
        let off = if d > 1 { self.sigma[(0, 1)] } else { 0.0 };
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j { diag } else { off };
                if self.sigma[(i, j)] != expected {
                    return None;
                }
            }
        }
        Some((diag, off))
    }
}

/// Stacks the estimates and fills the covariance matrix from every pair of
/// evaluations (diagonal = each evaluation's variance).
pub fn build_sigma(evals: &[SplitEvaluation]) -> Result<EstimateEnsemble> {
    let first = evals.first().ok_or(Error::TooFewSplits { needed: 1, got: 0 })?;
    let kind = first.kind;
    let d = evals.len();
    let mut sigma = DMatrix::zeros(d, d);
    for i in 0..d {
        sigma[(i, i)] = evals[i].var_hat;
        for j in 0..i {
            let c = match kind {
                LossKind::Mspe => mspe_covariance(&evals[i], &evals[j]),
                LossKind::Cindex => cindex_covariance(&evals[i], &evals[j]),
            }
            .map_err(|e| e.context("covariance", Some(evals[i].split_id())))?;
            sigma[(i, j)] = c;
            sigma[(j, i)] = c;
        }
    }
    EstimateEnsemble::new(evals.iter().map(|e| e.err_hat).collect(), sigma, kind)
}

/// Replaces the diagonal by its mean and every off-diagonal entry by the
/// mean of the strict upper triangle. Estimates are unchanged.
pub fn compound_symmetrize(ensemble: &EstimateEnsemble) -> Result<EstimateEnsemble> {
    let d = ensemble.len();
    if d < 2 {
        return Err(Error::TooFewSplits { needed: 2, got: d });
    }
    if ensemble.compound_symmetry().is_some() {
        return Ok(ensemble.clone());
    }
    let s = &ensemble.sigma;
    let diag = (0..d).map(|i| s[(i, i)]).sum::<f64>() / d as f64;
    let mut off_sum = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            off_sum += s[(i, j)];
        }
    }
    let off = 2.0 * off_sum / (d as f64 * (d - 1) as f64);
    let sigma = DMatrix::from_fn(d, d, |i, j| if i == j { diag } else { off });
    Ok(EstimateEnsemble {
        estimates: ensemble.estimates.clone(),
        sigma,
        loss_kind: ensemble.loss_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LinearModel;

    /// Predictor that returns the first feature, so tests control scores directly.
    struct FirstFeature;

    impl Predictor for FirstFeature {
        fn n_features(&self) -> usize {
            1
        }
        fn score(&self, row: &[f64]) -> f64 {
            row[0]
        }
    }

    fn continuous(scores: &[f64], targets: &[f64]) -> Dataset {
        Dataset::new(scores.to_vec(), 1, targets.to_vec(), Task::Continuous).unwrap()
    }

    fn plan(n: usize, test: &[usize]) -> SplitPlan {
        let train = (0..n).filter(|i| !test.contains(i)).collect();
        SplitPlan::from_indices(0, n, train, test.to_vec()).unwrap()
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let d = continuous(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]);
        let e = evaluate_mspe(&FirstFeature, &d, &plan(4, &[1, 3])).unwrap();
        assert_eq!(e.err_hat(), 0.0);
        assert_eq!(e.var_hat(), 0.0);
    }

    #[test]
    fn equal_losses_have_zero_variance() {
        let d = continuous(&[0.0, 0.0, 0.0], &[5.0, 1.0, -1.0]);
        let e = evaluate_mspe(&FirstFeature, &d, &plan(3, &[1, 2])).unwrap();
        assert_eq!(e.err_hat(), 1.0);
        assert_eq!(e.var_hat(), 0.0);
    }

    #[test]
    fn residuals_zero_and_two() {
        let d = continuous(&[0.0, 0.0, 0.0], &[5.0, 0.0, 2.0]);
        let e = evaluate_mspe(&FirstFeature, &d, &plan(3, &[1, 2])).unwrap();
        assert_eq!(e.err_hat(), 2.0);
        // (1/4) * ((0 - 2)^2 + (4 - 2)^2)
        assert_eq!(e.var_hat(), 2.0);
        assert_eq!(e.losses().unwrap(), &[0.0, 4.0]);
    }

    #[test]
    fn mspe_covariance_cases() {
        let d = continuous(&[0.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let a = evaluate_mspe(&FirstFeature, &d, &plan(6, &[0, 1])).unwrap();
        let b = evaluate_mspe(&FirstFeature, &d, &plan(6, &[2, 3])).unwrap();
        let c = evaluate_mspe(&FirstFeature, &d, &plan(6, &[1, 4])).unwrap();
        assert_eq!(mspe_covariance(&a, &b).unwrap(), 0.0);
        assert_eq!(mspe_covariance(&a, &a).unwrap(), a.var_hat());
        // Only row 1 is shared.
        let ca = a.losses().unwrap()[1] - a.err_hat();
        let cc = c.losses().unwrap()[0] - c.err_hat();
        assert_eq!(mspe_covariance(&a, &c).unwrap(), ca * cc / 4.0);
    }

    #[test]
    fn mismatched_datasets_are_rejected() {
        let d1 = continuous(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        let d2 = continuous(&[0.0; 4], &[1.0, 2.0, 3.0, 5.0]);
        let a = evaluate_mspe(&FirstFeature, &d1, &plan(4, &[0, 1])).unwrap();
        let b = evaluate_mspe(&FirstFeature, &d2, &plan(4, &[0, 1])).unwrap();
        assert!(matches!(mspe_covariance(&a, &b), Err(Error::MismatchedData(_))));
        assert!(build_sigma(&[a, b]).is_err());
    }

    fn binary(scores: &[f64], labels: &[f64]) -> Dataset {
        Dataset::new(scores.to_vec(), 1, labels.to_vec(), Task::Binary).unwrap()
    }

    #[test]
    fn cindex_examples() {
        // Row 0 is training; test rows score neg = (0.1, 0.7), pos = (0.5, 0.9).
        let d = binary(&[0.0, 0.1, 0.7, 0.5, 0.9], &[0.0, 0.0, 0.0, 1.0, 1.0]);
        let e = evaluate_cindex(&FirstFeature, &d, &plan(5, &[1, 2, 3, 4])).unwrap();
        assert_eq!(e.err_hat(), 0.75);
        assert_eq!(e.class_counts(), Some((2, 2)));

        let sep = binary(&[0.0, 0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(evaluate_cindex(&FirstFeature, &sep, &plan(5, &[1, 2, 3, 4])).unwrap().err_hat(), 1.0);

        let ties = binary(&[0.3; 5], &[0.0, 0.0, 0.0, 1.0, 1.0]);
        let e = evaluate_cindex(&FirstFeature, &ties, &plan(5, &[1, 2, 3, 4])).unwrap();
        assert_eq!(e.err_hat(), 0.0);
        assert!(e.var_hat() >= 0.0);
    }

    #[test]
    fn cindex_needs_both_classes() {
        let d = binary(&[0.0, 0.1, 0.2, 0.8], &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            evaluate_cindex(&FirstFeature, &d, &plan(4, &[1, 2, 3])),
            Err(Error::DegenerateTestSet { negatives: 3, positives: 0 })
        ));
    }

    #[test]
    fn cindex_self_covariance_is_variance() {
        let d = binary(&[0.0, 0.4, 0.2, 0.8, 0.3, 0.6], &[0.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let e = evaluate_cindex(&FirstFeature, &d, &plan(6, &[1, 2, 3, 4, 5])).unwrap();
        assert_eq!(cindex_covariance(&e, &e).unwrap(), e.var_hat());
        let f = evaluate_cindex(&FirstFeature, &d, &plan(6, &[0, 2])).unwrap();
        let g = evaluate_cindex(&FirstFeature, &d, &plan(6, &[1, 3])).unwrap();
        assert_eq!(cindex_covariance(&f, &g).unwrap(), 0.0);
    }

    #[test]
    fn sigma_from_one_evaluation() {
        let d = continuous(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        let e = evaluate_mspe(&LinearModel::zero(1, Task::Continuous), &d, &plan(4, &[0, 3])).unwrap();
        let ens = build_sigma(std::slice::from_ref(&e)).unwrap();
        assert_eq!(ens.len(), 1);
        assert_eq!(ens.sigma()[(0, 0)], e.var_hat());
        assert!(compound_symmetrize(&ens).is_err());
    }

    #[test]
    fn compound_symmetrize_averages() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 3.0]);
        let ens = EstimateEnsemble::new(vec![1.0, 2.0], sigma, LossKind::Mspe).unwrap();
        let cs = compound_symmetrize(&ens).unwrap();
        assert_eq!(cs.sigma().as_slice(), &[2.0, 0.5, 0.5, 2.0]);
        assert_eq!(cs.estimates(), ens.estimates());
        assert_eq!(compound_symmetrize(&cs).unwrap(), cs);
        assert_eq!(cs.compound_symmetry(), Some((2.0, 0.5)));
        assert_eq!(ens.compound_symmetry(), None);
    }

    #[test]
    fn ensemble_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(EstimateEnsemble::new(vec![0.0, 0.0], asym, LossKind::Mspe).is_err());
        let neg = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(EstimateEnsemble::new(vec![0.0], neg, LossKind::Mspe).is_err());
        assert!(EstimateEnsemble::new(vec![0.0], DMatrix::zeros(2, 2), LossKind::Mspe).is_err());
    }
}
