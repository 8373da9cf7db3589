//! C ABI for cvshrink.
//!
//! Objects cross the boundary as opaque handles created by `cvs_*_new` (or
//! another constructor) and released with the matching `cvs_*_free`.
//! Every fallible function returns a [`CvsStatus`]; on failure
//! [`cvs_last_error`] describes the problem. Output pointers are written
//! only on success.
//!
//! The C header is generated into `include/cvshrink.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvshrink::estimators::{eb_estimate, report_from_ensemble, Tau2Estimate};
use cvshrink::metrics::{cindex_from_scores, cindex_with_variance, mspe_from_scores};
use cvshrink::{
    build_sigma, compound_symmetrize, cv_estimate, naive_estimate, tau2_moment, Dataset, Error, ErrorClass,
    EstimateEnsemble, GibbsConfig, LossKind, PerformanceReport, PriorSpec, RngState, SplitEvaluation, SplitPlan,
    Task,
};
use nalgebra::DMatrix;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Invalid arguments or settings.
    InvalidArgument = 2,
    /// The inputs cannot support the computation (degenerate test sets,
    /// too few splits, mismatched sizes).
    DataError = 3,
    /// A numerical step failed.
    NumericalError = 4,
    /// Serialization failed.
    SerializationError = 5,
    /// Internal error; the library state is unchanged.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsLossKind {
    /// Mean squared prediction error (continuous outcomes).
    Mspe = 0,
    /// Concordance index (binary outcomes coded 0/1).
    Cindex = 1,
}

impl From<CvsLossKind> for LossKind {
    fn from(k: CvsLossKind) -> Self {
        match k {
            CvsLossKind::Mspe => LossKind::Mspe,
            CvsLossKind::Cindex => LossKind::Cindex,
        }
    }
}

/// Normal-Gamma prior of the hierarchical model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvsPrior {
    pub a0: f64,
    pub b0: f64,
    pub kappa0: f64,
}

/// Gibbs sampler settings. `seed` and `stream` select the random stream.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvsGibbsOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub stream: u64,
}

/// Point estimates and interval of a report. Optional values carry a
/// `has_*` flag; when it is false the value is NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvsEstimates {
    pub naive: f64,
    pub cv: f64,
    pub eb: f64,
    pub bayes: f64,
    pub lower: f64,
    pub upper: f64,
    pub has_eb: bool,
    pub has_bayes: bool,
    pub has_interval: bool,
    pub tau2: f64,
    pub tau2_clipped: bool,
}

/// Per-split estimates with their covariance matrix.
pub struct CvsEnsemble {
    inner: EstimateEnsemble,
}

/// Output of the full estimator set.
pub struct CvsReport {
    inner: PerformanceReport,
}

/// Accumulates per-split test scores for one dataset, for callers that fit
/// their own models.
pub struct CvsEnsembleBuilder {
    data: Dataset,
    kind: LossKind,
    evaluations: Vec<SplitEvaluation>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> CvsStatus {
    match err.class() {
        ErrorClass::Config => CvsStatus::InvalidArgument,
        ErrorClass::Data => CvsStatus::DataError,
        ErrorClass::Numerical => CvsStatus::NumericalError,
        ErrorClass::Io => CvsStatus::SerializationError,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CvsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CvsStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("`{name}` is NULL"));
            CvsStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(msg);
            CvsStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            CvsStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cvs_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Default prior (a0 = b0 = 0.01, kappa0 = 1e-4).
#[no_mangle]
pub extern "C" fn cvs_prior_default() -> CvsPrior {
    let p = PriorSpec::default();
    CvsPrior {
        a0: p.a0,
        b0: p.b0,
        kappa0: p.kappa0,
    }
}

/// Default sampler settings (10000 iterations, 2000 burn-in) on `seed`.
#[no_mangle]
pub extern "C" fn cvs_gibbs_options_default(seed: u64) -> CvsGibbsOptions {
    let g = GibbsConfig::default();
    CvsGibbsOptions {
        iterations: g.iterations,
        burn_in: g.burn_in,
        seed,
        stream: 0,
    }
}

/// Builds an ensemble from `d` split estimates (split 0 first) and their
/// `d x d` covariance matrix in row-major order.
///
/// # Safety
/// `estimates` must point to `d` doubles, `sigma` to `d * d` doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cvs_ensemble_new(
    estimates: *const f64,
    d: usize,
    sigma: *const f64,
    kind: CvsLossKind,
    out_handle: *mut *mut CvsEnsemble,
) -> CvsStatus {
    guard(|| {
        let estimates = slice(estimates, d, "estimates")?.to_vec();
        let cells = d.checked_mul(d).ok_or_else(|| Failure::Invalid("d is too large".into()))?;
        let sigma = slice(sigma, cells, "sigma")?;
        let out_handle = out(out_handle, "out")?;
        let sigma = DMatrix::from_row_slice(d, d, sigma);
        let inner = EstimateEnsemble::new(estimates, sigma, kind.into())?;
        *out_handle = Box::into_raw(Box::new(CvsEnsemble { inner }));
        Ok(())
    })
}

/// Releases an ensemble. NULL is ignored.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvs_ensemble_free(handle: *mut CvsEnsemble) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of splits in the ensemble (0 for NULL).
///
/// # Safety
/// `handle` must be NULL or a live ensemble.
#[no_mangle]
pub unsafe extern "C" fn cvs_ensemble_len(handle: *const CvsEnsemble) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.len())
}

/// Copies the estimates (`d` values) and the covariance matrix (`d * d`
/// values, row-major) into caller buffers. Either buffer may be NULL.
///
/// # Safety
/// Non-NULL buffers must hold `d` and `d * d` doubles respectively.
#[no_mangle]
pub unsafe extern "C" fn cvs_ensemble_get(handle: *const CvsEnsemble, estimates: *mut f64, sigma: *mut f64) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        let d = ens.len();
        if !estimates.is_null() {
            std::slice::from_raw_parts_mut(estimates, d).copy_from_slice(ens.estimates());
        }
        if !sigma.is_null() {
            let buf = std::slice::from_raw_parts_mut(sigma, d * d);
            for i in 0..d {
                for j in 0..d {
                    buf[i * d + j] = ens.sigma()[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// New ensemble with the compound-symmetric covariance: common diagonal
/// and common off-diagonal value.
///
/// # Safety
/// `handle` must be a live ensemble; `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_compound_symmetrize(handle: *const CvsEnsemble, out_handle: *mut *mut CvsEnsemble) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        let out_handle = out(out_handle, "out")?;
        let inner = compound_symmetrize(ens)?;
        *out_handle = Box::into_raw(Box::new(CvsEnsemble { inner }));
        Ok(())
    })
}

/// Split-0 estimate.
///
/// # Safety
/// `handle` must be a live ensemble; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_naive(handle: *const CvsEnsemble, value: *mut f64) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        *out(value, "value")? = naive_estimate(ens);
        Ok(())
    })
}

/// Mean over all splits.
///
/// # Safety
/// `handle` must be a live ensemble; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_cv(handle: *const CvsEnsemble, value: *mut f64) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        *out(value, "value")? = cv_estimate(ens);
        Ok(())
    })
}

/// Moment estimate of the between-split variance. `raw` receives the
/// unclipped value and `clipped` whether it was negative; both may be NULL.
///
/// # Safety
/// `handle` must be a live ensemble; non-NULL outputs writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_tau2(handle: *const CvsEnsemble, value: *mut f64, raw: *mut f64, clipped: *mut bool) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        let value = out(value, "value")?;
        let Tau2Estimate { value: v, raw: r, clipped: c } = tau2_moment(ens)?;
        *value = v;
        if let Some(raw) = raw.as_mut() {
            *raw = r;
        }
        if let Some(clipped) = clipped.as_mut() {
            *clipped = c;
        }
        Ok(())
    })
}

/// Empirical-Bayes estimate.
///
/// # Safety
/// `handle` must be a live ensemble; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_eb(handle: *const CvsEnsemble, value: *mut f64) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        *out(value, "value")? = eb_estimate(ens)?;
        Ok(())
    })
}

/// Runs every estimator, including the Gibbs sampler, and returns a
/// report. `prior` and `options` may be NULL for the defaults (seed 0).
/// The interval has level `1 - alpha`.
///
/// # Safety
/// `handle` must be a live ensemble; non-NULL pointers valid;
/// `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_report_new(
    handle: *const CvsEnsemble,
    prior: *const CvsPrior,
    options: *const CvsGibbsOptions,
    alpha: f64,
    out_handle: *mut *mut CvsReport,
) -> CvsStatus {
    guard(|| {
        let ens = &nonnull(handle, "handle")?.inner;
        let out_handle = out(out_handle, "out")?;
        let prior = prior.as_ref().copied().unwrap_or_else(|| cvs_prior_default());
        let options = options.as_ref().copied().unwrap_or_else(|| cvs_gibbs_options_default(0));
        let prior = PriorSpec {
            a0: prior.a0,
            b0: prior.b0,
            kappa0: prior.kappa0,
        };
        let gibbs = GibbsConfig {
            iterations: options.iterations,
            burn_in: options.burn_in,
            rng: RngState::with_stream(options.seed, options.stream),
            fixed_hyperparameters: None,
        };
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Failure::Invalid(format!("alpha must be in (0, 1), got {alpha}")));
        }
        let (inner, _) = report_from_ensemble(ens, &prior, &gibbs, alpha)?;
        *out_handle = Box::into_raw(Box::new(CvsReport { inner }));
        Ok(())
    })
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvs_report_free(handle: *mut CvsReport) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live report; `estimates` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_report_estimates(handle: *const CvsReport, estimates: *mut CvsEstimates) -> CvsStatus {
    guard(|| {
        let r = &nonnull(handle, "handle")?.inner;
        let ci = r.credible_interval.as_ref();
        *out(estimates, "estimates")? = CvsEstimates {
            naive: r.naive,
            cv: r.cv,
            eb: r.eb.unwrap_or(f64::NAN),
            bayes: r.bayes.unwrap_or(f64::NAN),
            lower: ci.map_or(f64::NAN, |c| c.lower),
            upper: ci.map_or(f64::NAN, |c| c.upper),
            has_eb: r.eb.is_some(),
            has_bayes: r.bayes.is_some(),
            has_interval: ci.is_some(),
            tau2: r.tau2_hat.unwrap_or(f64::NAN),
            tau2_clipped: r.tau2_clipped,
        };
        Ok(())
    })
}

/// The report as a JSON document. Release the string with
/// [`cvs_string_free`].
///
/// # Safety
/// `handle` must be a live report; `json` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_report_to_json(handle: *const CvsReport, json: *mut *mut c_char) -> CvsStatus {
    guard(|| {
        let r = &nonnull(handle, "handle")?.inner;
        let json = out(json, "json")?;
        let text = serde_json::to_string_pretty(r).map_err(|e| Error::Serialization(e.to_string()))?;
        *json = CString::new(text)
            .map_err(|e| Error::Serialization(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Empirical c-index of `scores` against 0/1 labels, with its
/// placement-value variance estimate (`variance` may be NULL).
///
/// # Safety
/// `scores` and `labels` must point to `n` values; `cindex` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_cindex(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    cindex: *mut f64,
    variance: *mut f64,
) -> CvsStatus {
    guard(|| {
        let scores = slice(scores, n, "scores")?;
        let labels = slice(labels, n, "labels")?;
        let cindex = out(cindex, "cindex")?;
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Failure::Invalid(format!("labels must be 0 or 1, got {bad}")));
        }
        let positive: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        let (auc, var) = cindex_with_variance(scores, &positive)?;
        *cindex = auc;
        if let Some(v) = variance.as_mut() {
            *v = var;
        }
        Ok(())
    })
}

/// Starts an ensemble for a dataset with `n` rows and the given targets
/// (0/1 for the c-index).
///
/// # Safety
/// `targets` must point to `n` doubles; `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_builder_new(
    targets: *const f64,
    n: usize,
    kind: CvsLossKind,
    out_handle: *mut *mut CvsEnsembleBuilder,
) -> CvsStatus {
    guard(|| {
        let targets = slice(targets, n, "targets")?.to_vec();
        let out_handle = out(out_handle, "out")?;
        let task = match kind {
            CvsLossKind::Mspe => Task::Continuous,
            CvsLossKind::Cindex => Task::Binary,
        };
        let data = Dataset::new(vec![0.0; n], 1, targets, task)?;
        *out_handle = Box::into_raw(Box::new(CvsEnsembleBuilder {
            data,
            kind: kind.into(),
            evaluations: Vec::new(),
        }));
        Ok(())
    })
}

/// Adds the next split: the 0-based test rows (`n2` of them, distinct)
/// and the model's scores on those rows, in the same order. Predictions
/// for MSPE, risk scores for the c-index. The first split added is split 0.
///
/// # Safety
/// `builder` must be live; `test_rows` and `scores` must point to `n2`
/// values.
#[no_mangle]
pub unsafe extern "C" fn cvs_builder_add_split(
    builder: *mut CvsEnsembleBuilder,
    test_rows: *const usize,
    scores: *const f64,
    n2: usize,
) -> CvsStatus {
    guard(|| {
        let b = out(builder, "builder")?;
        let rows = slice(test_rows, n2, "test_rows")?;
        let scores = slice(scores, n2, "scores")?;
        let n = b.data.n();
        let mut is_test = vec![false; n];
        for &r in rows {
            if r >= n || std::mem::replace(&mut is_test[r], true) {
                return Err(Failure::Invalid(format!("test row {r} is out of range or repeated")));
            }
        }
        // Scores follow the ascending row order of the split.
        let mut order: Vec<usize> = (0..n2).collect();
        order.sort_by_key(|&i| rows[i]);
        let sorted_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let test: Vec<usize> = order.iter().map(|&i| rows[i]).collect();
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let id = b.evaluations.len();
        let split = SplitPlan::from_indices(id, n, train, test)?;
        let eval = match b.kind {
            LossKind::Mspe => mspe_from_scores(split, &b.data, sorted_scores),
            LossKind::Cindex => cindex_from_scores(split, &b.data, sorted_scores)?,
        };
        b.evaluations.push(eval);
        Ok(())
    })
}

/// Builds the ensemble (estimates and covariance) from the splits added
/// so far. The builder stays usable.
///
/// # Safety
/// `builder` must be live; `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn cvs_builder_finish(builder: *const CvsEnsembleBuilder, out_handle: *mut *mut CvsEnsemble) -> CvsStatus {
    guard(|| {
        let b = nonnull(builder, "builder")?;
        let out_handle = out(out_handle, "out")?;
        let inner = build_sigma(&b.evaluations)?;
        *out_handle = Box::into_raw(Box::new(CvsEnsemble { inner }));
        Ok(())
    })
}

/// Releases a builder. NULL is ignored.
///
/// # Safety
/// `builder` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvs_builder_free(builder: *mut CvsEnsembleBuilder) {
    if !builder.is_null() {
        drop(Box::from_raw(builder));
    }
}
