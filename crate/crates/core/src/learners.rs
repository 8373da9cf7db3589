//! Learner contract and the built-in lasso learners.
//!
//! Both learners minimise `(1/n1) * loss + lambda * ||beta||_1` with an
//! unpenalised intercept, where `loss` is half the residual sum of squares
//! (linear) or the negative log-likelihood (logistic). By default features
//! are standardised to mean 0 and population variance 1 before fitting and
//! the coefficients are mapped back to the original scale afterwards, so the
//! penalty acts on standardised coefficients.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

/// Scores rows with a fitted model.
pub trait Predictor {
    fn n_features(&self) -> usize;

    /// Score of one row; callers have already checked its length.
    fn score(&self, row: &[f64]) -> f64;

    fn converged(&self) -> bool {
        true
    }
}

/// Fits a model on a subset of rows of a dataset.
pub trait Learner: Sync {
    type Model: Predictor + Send + Sync;

    fn task(&self) -> Task;

    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Self::Model>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    LassoLinear,
    LassoLogistic,
}

impl LearnerKind {
    pub fn task(self) -> Task {
        match self {
            LearnerKind::LassoLinear => Task::Continuous,
            LearnerKind::LassoLogistic => Task::Binary,
        }
    }
}

/// What to do with a feature that is constant on the training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantFeatures {
    /// Fail with `DegenerateInput` when standardisation is requested.
    Reject,
    /// Leave the feature out of the fit; its coefficient is 0.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub standardize: bool,
    pub constant_features: ConstantFeatures,
}

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;

impl LearnerSpec {
    pub fn lasso_linear(lambda: f64) -> Self {
        LearnerSpec {
            kind: LearnerKind::LassoLinear,
            lambda,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            standardize: true,
            constant_features: ConstantFeatures::Reject,
        }
    }

    pub fn lasso_logistic(lambda: f64) -> Self {
        LearnerSpec {
            kind: LearnerKind::LassoLogistic,
            ..LearnerSpec::lasso_linear(lambda)
        }
    }

    pub fn for_task(task: Task, lambda: f64) -> Self {
        match task {
            Task::Continuous => LearnerSpec::lasso_linear(lambda),
            Task::Binary => LearnerSpec::lasso_logistic(lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// A fitted linear score `intercept + coefficients . z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub task: Task,
    pub penalty: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearModel {
    pub fn zero(p: usize, task: Task) -> Self {
        LinearModel {
            intercept: 0.0,
            coefficients: vec![0.0; p],
            task,
            penalty: 0.0,
            converged: true,
            iterations: 0,
        }
    }

    pub fn predict_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: row.len(),
            });
        }
        Ok(self.linear_score(row))
    }

    /// Scores for every row of a row-major matrix with `p` columns.
    pub fn predict_scores(&self, features: &[f64], p: usize) -> Result<Vec<f64>> {
        if p != self.coefficients.len() || (p > 0 && !features.len().is_multiple_of(p)) {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: p,
            });
        }
        if p == 0 {
            return Ok(Vec::new());
        }
        Ok(features.chunks_exact(p).map(|r| self.linear_score(r)).collect())
    }

    /// `expit(score)`, the fitted probability for binary tasks.
    pub fn probability(&self, row: &[f64]) -> Result<f64> {
        self.predict_score(row).map(expit)
    }

    fn linear_score(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, row)
    }
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn score(&self, row: &[f64]) -> f64 {
        self.linear_score(row)
    }

    fn converged(&self) -> bool {
        self.converged
    }
}

impl Learner for LearnerSpec {
    type Model = LinearModel;

    fn task(&self) -> Task {
        self.kind.task()
    }

    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<LinearModel> {
        match self.kind {
            LearnerKind::LassoLinear => fit_lasso_linear(data, rows, self),
            LearnerKind::LassoLogistic => fit_lasso_logistic(data, rows, self),
        }
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Training rows gathered into centred (and optionally scaled) columns.
struct Design {
    n: usize,
    p: usize,
    /// Original feature index of each retained column.
    active: Vec<usize>,
    cols: Vec<Vec<f64>>,
    center: Vec<f64>,
    scale: Vec<f64>,
    y: Vec<f64>,
}

impl Design {
    fn new(data: &Dataset, rows: &[usize], spec: &LearnerSpec) -> Result<Design> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("no training rows".into()));
        }
        let n = rows.len();
        let p = data.p();
        let nf = n as f64;
        let y: Vec<f64> = rows.iter().map(|&i| data.target(i)).collect();
        let mut active = Vec::with_capacity(p);
        let mut cols = Vec::with_capacity(p);
        let mut center = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for j in 0..p {
            let mut col: Vec<f64> = rows.iter().map(|&i| data.row(i)[j]).collect();
            let mean = col.iter().sum::<f64>() / nf;
            col.iter_mut().for_each(|v| *v -= mean);
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
            let constant = sd <= 1e-12 * (1.0 + mean.abs());
            if constant {
                if spec.standardize && spec.constant_features == ConstantFeatures::Reject {
                    return Err(Error::DegenerateInput(format!(
                        "feature {j} is constant on the training rows"
                    )));
                }
                continue;
            }
            let s = if spec.standardize { sd } else { 1.0 };
            if spec.standardize {
                col.iter_mut().for_each(|v| *v /= s);
            }
            active.push(j);
            cols.push(col);
            center.push(mean);
            scale.push(s);
        }
        Ok(Design {
            n,
            p,
            active,
            cols,
            center,
            scale,
            y,
        })
    }

    /// Maps an internal solution back to a model on the original feature scale.
    fn to_model(&self, beta: &[f64], alpha_centered: f64, spec: &LearnerSpec, converged: bool, iterations: usize) -> LinearModel {
        let mut coefficients = vec![0.0; self.p];
        let mut intercept = alpha_centered;
        for (a, &j) in self.active.iter().enumerate() {
            let b = beta[a] / self.scale[a];
            coefficients[j] = b;
            intercept -= b * self.center[a];
        }
        LinearModel {
            intercept,
            coefficients,
            task: spec.kind.task(),
            penalty: spec.lambda,
            converged,
            iterations,
        }
    }

    /// Internal coefficients of a model fitted on this design.
    fn internal_beta(&self, model: &LinearModel) -> Vec<f64> {
        self.active
            .iter()
            .enumerate()
            .map(|(a, &j)| model.coefficients[j] * self.scale[a])
            .collect()
    }

    fn linear_predictor(&self, alpha: f64, beta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = alpha);
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                out.iter_mut().zip(col).for_each(|(v, x)| *v += b * x);
            }
        }
    }
}

fn check_task(data: &Dataset, spec: &LearnerSpec) -> Result<()> {
    spec.validate()?;
    if data.task() != spec.kind.task() {
        return Err(Error::InvalidConfig(format!(
            "{:?} learner cannot fit a {} dataset",
            spec.kind,
            data.task()
        )));
    }
    Ok(())
}

/// Lasso least squares by cyclic coordinate descent.
pub fn fit_lasso_linear(data: &Dataset, rows: &[usize], spec: &LearnerSpec) -> Result<LinearModel> {
    fit_lasso_linear_traced(data, rows, spec, None)
}

/// As [`fit_lasso_linear`], recording the penalised objective after every sweep.
pub fn fit_lasso_linear_traced(
    data: &Dataset,
    rows: &[usize],
    spec: &LearnerSpec,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LinearModel> {
    check_task(data, spec)?;
    let design = Design::new(data, rows, spec)?;
    let n = design.n as f64;
    let lambda = spec.lambda;
    let ybar = design.y.iter().sum::<f64>() / n;
    let mut resid: Vec<f64> = design.y.iter().map(|y| y - ybar).collect();
    let curv: Vec<f64> = design.cols.iter().map(|c| dot(c, c) / n).collect();
    let mut beta = vec![0.0; design.cols.len()];

    let objective = |resid: &[f64], beta: &[f64]| {
        dot(resid, resid) / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    if let Some(t) = trace.as_deref_mut() {
        t.push(objective(&resid, &beta));
    }

    let mut converged = design.cols.is_empty();
    let mut sweeps = 0;
    while !converged && sweeps < spec.max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for (j, col) in design.cols.iter().enumerate() {
            let old = beta[j];
            let rho = dot(col, &resid) / n + curv[j] * old;
            let new = soft_threshold(rho, lambda) / curv[j];
            if new != old {
                let delta = new - old;
                resid.iter_mut().zip(col).for_each(|(r, x)| *r -= delta * x);
                beta[j] = new;
                max_change = max_change.max(delta.abs() * curv[j].sqrt());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(&resid, &beta));
        }
        converged = max_change < spec.tol;
    }
    Ok(design.to_model(&beta, ybar, spec, converged, sweeps))
}

/// Lasso logistic regression by proximal Newton steps: each outer iteration
/// solves the penalised weighted least-squares approximation by coordinate
/// descent, then backtracks along the step until the objective decreases.
pub fn fit_lasso_logistic(data: &Dataset, rows: &[usize], spec: &LearnerSpec) -> Result<LinearModel> {
    fit_lasso_logistic_traced(data, rows, spec, None)
}

pub fn fit_lasso_logistic_traced(
    data: &Dataset,
    rows: &[usize],
    spec: &LearnerSpec,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LinearModel> {
    check_task(data, spec)?;
    let design = Design::new(data, rows, spec)?;
    let n = design.n as f64;
    let lambda = spec.lambda;
    let ybar = design.y.iter().sum::<f64>() / n;
    if ybar == 0.0 || ybar == 1.0 {
        return Err(Error::SingleClassTraining);
    }
    let m = design.cols.len();
    let y = &design.y;
    let mut alpha = (ybar / (1.0 - ybar)).ln();
    let mut beta = vec![0.0; m];
    let mut eta = vec![0.0; design.n];
    let mut eta_try = vec![0.0; design.n];

    let objective = |eta: &[f64], beta: &[f64]| {
        eta.iter().zip(y).map(|(&e, &yi)| softplus(e) - yi * e).sum::<f64>() / n
            + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };

    design.linear_predictor(alpha, &beta, &mut eta);
    let mut current = objective(&eta, &beta);
    if let Some(t) = trace.as_deref_mut() {
        t.push(current);
    }

    let mut weights = vec![0.0; design.n];
    let mut resid = vec![0.0; design.n];
    let mut converged = false;
    let mut outer = 0;
    while !converged && outer < spec.max_iter {
        outer += 1;
        for i in 0..design.n {
            let prob = expit(eta[i]);
            let w = (prob * (1.0 - prob)).max(1e-5);
            weights[i] = w;
            resid[i] = (y[i] - prob) / w;
        }
        let wsum: f64 = weights.iter().sum();
        let curv: Vec<f64> = design
            .cols
            .iter()
            .map(|c| c.iter().zip(&weights).map(|(x, w)| w * x * x).sum::<f64>() / n)
            .collect();

        let mut a_new = alpha;
        let mut b_new = beta.clone();
        for _ in 0..spec.max_iter {
            let shift = resid.iter().zip(&weights).map(|(r, w)| r * w).sum::<f64>() / wsum;
            a_new += shift;
            resid.iter_mut().for_each(|r| *r -= shift);
            let mut max_change = shift.abs();
            for (j, col) in design.cols.iter().enumerate() {
                let old = b_new[j];
                let g = col
                    .iter()
                    .zip(&resid)
                    .zip(&weights)
                    .map(|((x, r), w)| w * x * r)
                    .sum::<f64>()
                    / n
                    + curv[j] * old;
                let new = soft_threshold(g, lambda) / curv[j];
                if new != old {
                    let delta = new - old;
                    resid.iter_mut().zip(col).for_each(|(r, x)| *r -= delta * x);
                    b_new[j] = new;
                    max_change = max_change.max(delta.abs() * curv[j].sqrt());
                }
            }
            if max_change < spec.tol {
                break;
            }
        }

        let d_alpha = a_new - alpha;
        let d_beta: Vec<f64> = b_new.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let step_size = d_beta.iter().fold(d_alpha.abs(), |acc, d| acc.max(d.abs()));
        if step_size < spec.tol {
            converged = true;
            break;
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let a_try = alpha + t * d_alpha;
            let b_try: Vec<f64> = beta.iter().zip(&d_beta).map(|(b, d)| b + t * d).collect();
            design.linear_predictor(a_try, &b_try, &mut eta_try);
            let f_try = objective(&eta_try, &b_try);
            if f_try <= current + 1e-14 * current.abs() {
                alpha = a_try;
                beta = b_try;
                std::mem::swap(&mut eta, &mut eta_try);
                current = f_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(current);
        }
        if !accepted || t * step_size < spec.tol {
            converged = accepted;
            break;
        }
    }
    Ok(design.to_model(&beta, alpha, spec, converged, outer))
}

/// Largest violation of the lasso optimality conditions, measured on the
/// internal (standardised) scale: `|g_j| <= lambda` for zero coefficients,
/// `g_j = lambda * sign(beta_j)` otherwise, and a zero intercept gradient,
/// where `g` is the negative loss gradient divided by `n1`.
pub fn kkt_violation(data: &Dataset, rows: &[usize], spec: &LearnerSpec, model: &LinearModel) -> Result<f64> {
    let design = Design::new(data, rows, spec)?;
    let n = design.n as f64;
    let beta = design.internal_beta(model);
    let resid: Vec<f64> = rows
        .iter()
        .zip(&design.y)
        .map(|(&i, &yi)| {
            let s = model.linear_score(data.row(i));
            match spec.kind {
                LearnerKind::LassoLinear => yi - s,
                LearnerKind::LassoLogistic => yi - expit(s),
            }
        })
        .collect();
    let mut worst = (resid.iter().sum::<f64>() / n).abs();
    for (col, &b) in design.cols.iter().zip(&beta) {
        let g = dot(col, &resid) / n;
        let v = if b == 0.0 {
            (g.abs() - spec.lambda).max(0.0)
        } else {
            (g - spec.lambda * b.signum()).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Smallest penalty at which every coefficient is zero:
/// `max_j |(1/n1) sum_i x_ij (y_i - ybar)|` on the internal feature scale.
pub fn lambda_max(data: &Dataset, rows: &[usize], spec: &LearnerSpec) -> Result<f64> {
    let design = Design::new(data, rows, spec)?;
    let n = design.n as f64;
    let ybar = design.y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = design.y.iter().map(|y| y - ybar).collect();
    Ok(design.cols.iter().map(|c| (dot(c, &yc) / n).abs()).fold(0.0, f64::max))
}
