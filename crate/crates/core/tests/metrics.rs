mod common;

use common::{brute_cindex, direct_cindex_cov, direct_mspe_cov, random_instance, rel_close, Scores};
use cvshrink::metrics::{cindex_from_scores, cindex_with_variance, covariance, mspe_from_scores};
use cvshrink::{
    build_sigma, cindex_covariance, compound_symmetrize, mspe_covariance, Dataset, EstimateEnsemble, LossKind,
    RngState, SplitPlan, Task,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn cindex_equals_brute_force_on_random_instances() {
    let mut checked = 0;
    for seed in 0..500u64 {
        let mut rng = RngState::new(seed).rng();
        let n2 = rng.random_range(2..=20usize);
        let scores: Vec<f64> = (0..n2).map(|_| f64::from(rng.random_range(0..6u8))).collect();
        let positive: Vec<bool> = (0..n2).map(|_| rng.random::<bool>()).collect();
        if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
            assert!(cindex_with_variance(&scores, &positive).is_err());
            continue;
        }
        let (auc, var) = cindex_with_variance(&scores, &positive).unwrap();
        assert_eq!(auc, brute_cindex(&scores, &positive), "seed {seed}");
        assert!(var >= 0.0);
        checked += 1;
    }
    assert!(checked > 400);
}

#[test]
fn covariances_match_direct_summation() {
    for seed in 0..200u64 {
        let inst = random_instance(Task::Continuous, seed);
        let [a, b] = inst.evaluations().unwrap();
        let want = direct_mspe_cov(&inst.data, &inst.scores[0], &inst.scores[1]);
        let got = mspe_covariance(&a, &b).unwrap();
        assert!(rel_close(got, want, 1e-12), "seed {seed}: {got} vs {want}");
        assert_eq!(covariance(&a, &b).unwrap(), got);
    }
    let mut checked = 0;
    for seed in 0..400u64 {
        let inst = random_instance(Task::Binary, seed);
        let Some([a, b]) = inst.evaluations() else { continue };
        let want = direct_cindex_cov(&inst.data, &inst.scores[0], &inst.scores[1]);
        let got = cindex_covariance(&a, &b).unwrap();
        assert!(rel_close(got, want, 1e-12), "seed {seed}: {got} vs {want}");
        assert!(rel_close(a.var_hat(), direct_cindex_cov(&inst.data, &inst.scores[0], &inst.scores[0]), 1e-12));
        checked += 1;
    }
    assert!(checked >= 200);
}

fn binary_data(labels: &[u8]) -> Dataset {
    let y = labels.iter().map(|&l| f64::from(l)).collect::<Vec<_>>();
    Dataset::new(vec![0.0; labels.len()], 1, y, Task::Binary).unwrap()
}

fn split(n: usize, test: &[usize]) -> SplitPlan {
    let train = (0..n).filter(|i| !test.contains(i)).collect();
    SplitPlan::from_indices(0, n, train, test.to_vec()).unwrap()
}

#[test]
fn cindex_covariance_small_overlap() {
    // Test sets of 6 sharing rows 0, 1 (negatives) and 2 (positive).
    let labels = [0, 0, 1, 1, 0, 1, 0, 1, 1, 0];
    let data = binary_data(&labels);
    let (ta, tb) = ([0, 1, 2, 3, 4, 5], [0, 1, 2, 6, 7, 8]);
    let sa = [0.2, 0.9, 0.4, 0.6, 0.1, 0.3];
    let sb = [0.5, 0.1, 0.8, 0.2, 0.7, 0.45];
    let a = cindex_from_scores(split(10, &ta), &data, sa.to_vec()).unwrap();
    let b = cindex_from_scores(split(10, &tb), &data, sb.to_vec()).unwrap();
    let map = |t: &[usize], s: &[f64]| -> Scores { t.iter().copied().zip(s.iter().copied()).collect() };
    let want = direct_cindex_cov(&data, &map(&ta, &sa), &map(&tb, &sb));
    let got = cindex_covariance(&a, &b).unwrap();
    assert!(rel_close(got, want, 1e-12), "{got} vs {want}");
    assert!(want != 0.0);
}

#[test]
fn mspe_examples() {
    let data = Dataset::new(vec![0.0; 4], 1, vec![1.0, 2.0, 3.0, 4.0], Task::Continuous).unwrap();
    // Residuals (0, 2): err 2, variance ((0-2)^2 + (4-2)^2) / 4 = 2.
    let e = mspe_from_scores(split(4, &[0, 1]), &data, vec![1.0, 0.0]);
    assert_eq!((e.err_hat(), e.var_hat()), (2.0, 2.0));
    // Residuals (1, -1).
    let e = mspe_from_scores(split(4, &[2, 3]), &data, vec![2.0, 5.0]);
    assert_eq!((e.err_hat(), e.var_hat()), (1.0, 0.0));
    // One shared test row: the single centered product over n2^2.
    let a = mspe_from_scores(split(4, &[0, 1]), &data, vec![1.0, 0.0]);
    let b = mspe_from_scores(split(4, &[1, 2]), &data, vec![1.0, 3.0]);
    let (ca, cb) = (4.0 - 2.0, 1.0 - 0.5);
    assert_eq!(mspe_covariance(&a, &b).unwrap(), ca * cb / 4.0);
    let c = mspe_from_scores(split(4, &[2, 3]), &data, vec![2.0, 5.0]);
    assert_eq!(mspe_covariance(&a, &c).unwrap(), 0.0);
}

#[test]
fn sigma_for_forty_splits_is_symmetric() {
    let n = 60;
    let mut rng = RngState::new(5).rng();
    let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let data = Dataset::new(vec![0.0; n], 1, y, Task::Continuous).unwrap();
    let family = cvshrink::make_split_family(n, 40, 39, &RngState::new(6)).unwrap();
    let evals: Vec<_> = family
        .into_iter()
        .map(|s| {
            let scores = (0..s.n2()).map(|_| rng.random::<f64>()).collect();
            mspe_from_scores(s, &data, scores)
        })
        .collect();
    let ens = build_sigma(&evals).unwrap();
    assert_eq!(ens.sigma().shape(), (40, 40));
    assert_eq!((ens.sigma() - ens.sigma().transpose()).amax(), 0.0);
    for (k, e) in evals.iter().enumerate() {
        assert_eq!(ens.sigma()[(k, k)], e.var_hat());
        assert_eq!(ens.estimates()[k], e.err_hat());
    }
}

fn symmetric(d: usize, cells: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut it = cells.iter();
    for i in 0..d {
        m[(i, i)] = it.next().unwrap().abs();
        for j in i + 1..d {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn off_mean(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut s = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            s += m[(i, j)];
        }
    }
    s / (d * (d - 1) / 2) as f64
}

proptest! {
    #[test]
    fn compound_symmetrize_preserves_means_and_is_idempotent(
        d in 2usize..8,
        cells in prop::collection::vec(-2.0f64..2.0, 36),
        est in prop::collection::vec(0.0f64..3.0, 8),
    ) {
        let sigma = symmetric(d, &cells);
        let ens = EstimateEnsemble::new(est[..d].to_vec(), sigma.clone(), LossKind::Mspe).unwrap();
        let cs = compound_symmetrize(&ens).unwrap();
        prop_assert_eq!(cs.estimates(), ens.estimates());
        let diag_mean = sigma.diagonal().mean();
        prop_assert!((cs.sigma().diagonal().mean() - diag_mean).abs() <= 1e-12 * (1.0 + diag_mean.abs()));
        prop_assert!((off_mean(cs.sigma()) - off_mean(&sigma)).abs() <= 1e-12);
        let (dg, off) = cs.compound_symmetry().unwrap();
        prop_assert_eq!(cs.sigma()[(0, 0)], dg);
        prop_assert_eq!(cs.sigma()[(0, 1)], off);
        let again = compound_symmetrize(&cs).unwrap();
        prop_assert_eq!(again.sigma(), cs.sigma());
    }

    #[test]
    fn self_covariance_is_the_variance(seed in 0u64..10_000, binary in any::<bool>()) {
        let task = if binary { Task::Binary } else { Task::Continuous };
        let inst = random_instance(task, seed);
        if let Some([a, _]) = inst.evaluations() {
            prop_assert_eq!(covariance(&a, &a).unwrap(), a.var_hat());
            prop_assert!(a.var_hat() >= 0.0);
            if binary {
                prop_assert!((0.0..=1.0).contains(&a.err_hat()));
            } else {
                prop_assert!(a.err_hat() >= 0.0);
            }
        }
    }
}

#[test]
fn compound_symmetrize_example() {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 3.0]);
    let ens = EstimateEnsemble::new(vec![0.1, 0.2], sigma, LossKind::Mspe).unwrap();
    let cs = compound_symmetrize(&ens).unwrap();
    assert_eq!(cs.sigma(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 2.0]));
}
