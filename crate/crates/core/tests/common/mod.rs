//! Independent reference computations shared by the integration tests.
//! They work from raw scores and targets and never touch the library's
//! stored per-observation quantities.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cvshrink::learners::LinearModel;
use cvshrink::metrics::{cindex_from_scores, covariance, mspe_from_scores};
use cvshrink::simulation::{gen_binary, gen_continuous, SimConfig};
use cvshrink::{make_split, Dataset, RngState, SplitEvaluation, SplitPlan, Task};
use rand::Rng;
use rand_distr::StandardNormal;

/// Test row -> score.
pub type Scores = BTreeMap<usize, f64>;

/// Concordant (negative, positive) pairs under the strict indicator,
/// divided by the number of such pairs.
pub fn brute_cindex(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut hits, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if !positive[i] && positive[j] {
                pairs += 1;
                if si < sj {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / pairs as f64
}

fn err_mspe(data: &Dataset, s: &Scores) -> f64 {
    s.iter().map(|(&i, &p)| (data.target(i) - p).powi(2)).sum::<f64>() / s.len() as f64
}

/// Sum over shared test rows of centered squared-error products, over n2^2.
pub fn direct_mspe_cov(data: &Dataset, a: &Scores, b: &Scores) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ea, eb) = (err_mspe(data, a), err_mspe(data, b));
    let n2 = a.len() as f64;
    let mut total = 0.0;
    for (&i, &pa) in a {
        if let Some(&pb) = b.get(&i) {
            let y = data.target(i);
            total += ((y - pa).powi(2) - ea) * ((y - pb).powi(2) - eb);
        }
    }
    total / (n2 * n2)
}

fn class(data: &Dataset, s: &Scores, label: f64) -> Vec<usize> {
    s.keys().copied().filter(|&i| data.target(i) == label).collect()
}

pub fn direct_cindex(data: &Dataset, s: &Scores) -> f64 {
    let neg = class(data, s, 0.0);
    let pos = class(data, s, 1.0);
    let mut hits = 0.0;
    for &i in &neg {
        for &j in &pos {
            if s[&i] < s[&j] {
                hits += 1.0;
            }
        }
    }
    hits / (neg.len() * pos.len()) as f64
}

/// Two-term U-statistic covariance: a term over shared negatives and one
/// over shared positives, each a product of centered sweep averages.
pub fn direct_cindex_cov(data: &Dataset, a: &Scores, b: &Scores) -> f64 {
    let (ea, eb) = (direct_cindex(data, a), direct_cindex(data, b));
    let (neg_a, pos_a) = (class(data, a, 0.0), class(data, a, 1.0));
    let (neg_b, pos_b) = (class(data, b, 0.0), class(data, b, 1.0));
    let sweep_pos = |s: &Scores, pos: &[usize], i: usize| {
        pos.iter().filter(|&&j| s[&i] < s[&j]).count() as f64 / pos.len() as f64
    };
    let sweep_neg = |s: &Scores, neg: &[usize], i: usize| {
        neg.iter().filter(|&&j| s[&j] < s[&i]).count() as f64 / neg.len() as f64
    };
    let mut neg_term = 0.0;
    for &i in neg_a.iter().filter(|i| neg_b.contains(i)) {
        neg_term += (sweep_pos(a, &pos_a, i) - ea) * (sweep_pos(b, &pos_b, i) - eb);
    }
    let mut pos_term = 0.0;
    for &i in pos_a.iter().filter(|i| pos_b.contains(i)) {
        pos_term += (sweep_neg(a, &neg_a, i) - ea) * (sweep_neg(b, &neg_b, i) - eb);
    }
    neg_term / (neg_a.len() * neg_b.len()) as f64 + pos_term / (pos_a.len() * pos_b.len()) as f64
}

pub struct Instance {
    pub data: Dataset,
    pub splits: [SplitPlan; 2],
    pub scores: [Scores; 2],
}

impl Instance {
    pub fn evaluations(&self) -> Option<[SplitEvaluation; 2]> {
        let eval = |k: usize| {
            let split = self.splits[k].clone();
            let scores: Vec<f64> = split.test_indices().iter().map(|i| self.scores[k][i]).collect();
            match self.data.task() {
                Task::Continuous => Some(mspe_from_scores(split, &self.data, scores)),
                Task::Binary => cindex_from_scores(split, &self.data, scores).ok(),
            }
        };
        Some([eval(0)?, eval(1)?])
    }
}

/// A random dataset with two overlapping splits of equal test size and
/// arbitrary scores. Binary scores are coarsened so ties occur.
pub fn random_instance(task: Task, seed: u64) -> Instance {
    let base = RngState::new(seed);
    let mut rng = base.substream(0).rng();
    let n = rng.random_range(8..30usize);
    let n1 = rng.random_range(n / 3..n - 2);
    let targets: Vec<f64> = (0..n)
        .map(|_| match task {
            Task::Continuous => rng.sample::<f64, _>(StandardNormal) * 2.0,
            Task::Binary => f64::from(rng.random::<bool>()),
        })
        .collect();
    let data = Dataset::new(vec![0.0; n], 1, targets, task).unwrap();
    let splits = [
        make_split(n, n1, &base.substream(1)).unwrap(),
        make_split(n, n1, &base.substream(2)).unwrap(),
    ];
    let mut draw = |split: &SplitPlan| -> Scores {
        split
            .test_indices()
            .iter()
            .map(|&i| {
                let z: f64 = rng.sample(StandardNormal);
                (i, if task == Task::Binary { (z * 2.0).round() / 2.0 } else { z })
            })
            .collect()
    };
    let scores = [draw(&splits[0]), draw(&splits[1])];
    Instance { data, splits, scores }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Outcome of the frozen-model covariance experiment.
#[derive(Debug, Clone, Copy)]
pub struct CovCheck {
    pub empirical: f64,
    pub predicted: f64,
    pub std_error: f64,
    pub skipped: usize,
}

impl CovCheck {
    pub fn within(&self, ses: f64) -> bool {
        (self.empirical - self.predicted).abs() <= ses * self.std_error
    }
}

fn frozen(coefficients: &[f64], intercept: f64, task: Task) -> LinearModel {
    LinearModel {
        intercept,
        coefficients: coefficients.to_vec(),
        ..LinearModel::zero(coefficients.len(), task)
    }
}

/// Two fixed linear models scored on fresh generator draws: test sets of
/// 40 rows each sharing 20 rows. Compares the across-draw covariance of
/// the two loss estimates with the average plug-in covariance.
pub fn frozen_model_covariance(task: Task, draws: usize, seed: u64) -> CovCheck {
    let (n2, shared) = (40, 20);
    let m = 2 * n2 - shared;
    let mut cfg = SimConfig::for_task(task, 1, seed);
    cfg.p = 5;
    cfg.beta0 = vec![0.5, 0.5, 0.5, 0.5, 0.0];
    cfg.n = m;
    let model_a = frozen(&[0.4, 0.6, 0.3, 0.5, 0.1], 0.1, task);
    let model_b = frozen(&[0.6, 0.2, 0.5, 0.4, -0.2], -0.1, task);
    let test_a: Vec<usize> = (0..n2).collect();
    let test_b: Vec<usize> = (n2 - shared..m).collect();
    let plan = |id, test: &[usize]| {
        let train = (0..m).filter(|i| !test.contains(i)).collect();
        SplitPlan::from_indices(id, m, train, test.to_vec()).unwrap()
    };

    let (mut xa, mut xb, mut sig) = (Vec::new(), Vec::new(), Vec::new());
    let mut skipped = 0;
    let base = RngState::new(seed);
    for d in 0..draws {
        let stream = base.substream(d as u64);
        let data = match task {
            Task::Continuous => gen_continuous(&cfg, &stream),
            Task::Binary => gen_binary(&cfg, &stream),
        }
        .unwrap();
        let scores = |model: &LinearModel, test: &[usize]| -> Vec<f64> {
            test.iter().map(|&i| model.predict_score(data.row(i)).unwrap()).collect()
        };
        let (sa, sb) = (scores(&model_a, &test_a), scores(&model_b, &test_b));
        let evals = match task {
            Task::Continuous => Some((
                mspe_from_scores(plan(0, &test_a), &data, sa),
                mspe_from_scores(plan(1, &test_b), &data, sb),
            )),
            Task::Binary => cindex_from_scores(plan(0, &test_a), &data, sa)
                .and_then(|a| Ok((a, cindex_from_scores(plan(1, &test_b), &data, sb)?)))
                .ok(),
        };
        let Some((a, b)) = evals else {
            skipped += 1;
            continue;
        };
        xa.push(a.err_hat());
        xb.push(b.err_hat());
        sig.push(covariance(&a, &b).unwrap());
    }

    let n = xa.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&xa), mean(&xb));
    let products: Vec<f64> = xa.iter().zip(&xb).map(|(a, b)| (a - ma) * (b - mb)).collect();
    let empirical = products.iter().sum::<f64>() / (n - 1.0);
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let predicted = mean(&sig);
    let std_error = ((var(&products) + var(&sig)) / n).sqrt();
    CovCheck {
        empirical,
        predicted,
        std_error,
        skipped,
    }
}
