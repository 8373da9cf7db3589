#ifndef CVSHRINK_H
#define CVSHRINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum CvsStatus {
  CVS_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  CVS_STATUS_NULL_POINTER = 1,
  /*
   Invalid arguments or settings.
   */
  CVS_STATUS_INVALID_ARGUMENT = 2,
  /*
   The inputs cannot support the computation (degenerate test sets,
   too few splits, mismatched sizes).
   */
  CVS_STATUS_DATA_ERROR = 3,
  /*
   A numerical step failed.
   */
  CVS_STATUS_NUMERICAL_ERROR = 4,
  /*
   Serialization failed.
   */
  CVS_STATUS_SERIALIZATION_ERROR = 5,
  /*
   Internal error; the library state is unchanged.
   */
  CVS_STATUS_PANIC = 6,
} CvsStatus;

typedef enum CvsLossKind {
  /*
   Mean squared prediction error (continuous outcomes).
   */
  CVS_LOSS_KIND_MSPE = 0,
  /*
   Concordance index (binary outcomes coded 0/1).
   */
  CVS_LOSS_KIND_CINDEX = 1,
} CvsLossKind;

/*
 Per-split estimates with their covariance matrix.
 */
typedef struct CvsEnsemble CvsEnsemble;

/*
 Accumulates per-split test scores for one dataset, for callers that fit
 their own models.
 */
typedef struct CvsEnsembleBuilder CvsEnsembleBuilder;

/*
 Output of the full estimator set.
 */
typedef struct CvsReport CvsReport;

/*
 Normal-Gamma prior of the hierarchical model.
 */
typedef struct CvsPrior {
  double a0;
  double b0;
  double kappa0;
} CvsPrior;

/*
 Gibbs sampler settings. `seed` and `stream` select the random stream.
 */
typedef struct CvsGibbsOptions {
  size_t iterations;
  size_t burn_in;
  uint64_t seed;
  uint64_t stream;
} CvsGibbsOptions;

/*
 Point estimates and interval of a report. Optional values carry a
 `has_*` flag; when it is false the value is NaN.
 */
typedef struct CvsEstimates {
  double naive;
  double cv;
  double eb;
  double bayes;
  double lower;
  double upper;
  bool has_eb;
  bool has_bayes;
  bool has_interval;
  double tau2;
  bool tau2_clipped;
} CvsEstimates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *cvs_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *cvs_version(void);

/*
 Default prior (a0 = b0 = 0.01, kappa0 = 1e-4).
 */
struct CvsPrior cvs_prior_default(void);

/*
 Default sampler settings (10000 iterations, 2000 burn-in) on `seed`.
 */
struct CvsGibbsOptions cvs_gibbs_options_default(uint64_t seed);

/*
 Builds an ensemble from `d` split estimates (split 0 first) and their
 `d x d` covariance matrix in row-major order.

 # Safety
 `estimates` must point to `d` doubles, `sigma` to `d * d` doubles and
 `out` to writable storage for one handle.
 */
enum CvsStatus cvs_ensemble_new(const double *estimates,
                                size_t d,
                                const double *sigma,
                                enum CvsLossKind kind,
                                struct CvsEnsemble **out_handle);

/*
 Releases an ensemble. NULL is ignored.

 # Safety
 `handle` must come from this library and not be used afterwards.
 */
void cvs_ensemble_free(struct CvsEnsemble *handle);

/*
 Number of splits in the ensemble (0 for NULL).

 # Safety
 `handle` must be NULL or a live ensemble.
 */
size_t cvs_ensemble_len(const struct CvsEnsemble *handle);

/*
 Copies the estimates (`d` values) and the covariance matrix (`d * d`
 values, row-major) into caller buffers. Either buffer may be NULL.

 # Safety
 Non-NULL buffers must hold `d` and `d * d` doubles respectively.
 */
enum CvsStatus cvs_ensemble_get(const struct CvsEnsemble *handle, double *estimates, double *sigma);

/*
 New ensemble with the compound-symmetric covariance: common diagonal
 and common off-diagonal value.

 # Safety
 `handle` must be a live ensemble; `out_handle` writable.
 */
enum CvsStatus cvs_compound_symmetrize(const struct CvsEnsemble *handle,
                                       struct CvsEnsemble **out_handle);

/*
 Split-0 estimate.

 # Safety
 `handle` must be a live ensemble; `value` writable.
 */
enum CvsStatus cvs_naive(const struct CvsEnsemble *handle, double *value);

/*
 Mean over all splits.

 # Safety
 `handle` must be a live ensemble; `value` writable.
 */
enum CvsStatus cvs_cv(const struct CvsEnsemble *handle, double *value);

/*
 Moment estimate of the between-split variance. `raw` receives the
 unclipped value and `clipped` whether it was negative; both may be NULL.

 # Safety
 `handle` must be a live ensemble; non-NULL outputs writable.
 */
enum CvsStatus cvs_tau2(const struct CvsEnsemble *handle,
                        double *value,
                        double *raw,
                        bool *clipped);

/*
 Empirical-Bayes estimate.

 # Safety
 `handle` must be a live ensemble; `value` writable.
 */
enum CvsStatus cvs_eb(const struct CvsEnsemble *handle, double *value);

/*
 Runs every estimator, including the Gibbs sampler, and returns a
 report. `prior` and `options` may be NULL for the defaults (seed 0).
 The interval has level `1 - alpha`.

 # Safety
 `handle` must be a live ensemble; non-NULL pointers valid;
 `out_handle` writable.
 */
enum CvsStatus cvs_report_new(const struct CvsEnsemble *handle,
                              const struct CvsPrior *prior,
                              const struct CvsGibbsOptions *options,
                              double alpha,
                              struct CvsReport **out_handle);

/*
 Releases a report. NULL is ignored.

 # Safety
 `handle` must come from this library and not be used afterwards.
 */
void cvs_report_free(struct CvsReport *handle);

/*
 # Safety
 `handle` must be a live report; `estimates` writable.
 */
enum CvsStatus cvs_report_estimates(const struct CvsReport *handle, struct CvsEstimates *estimates);

/*
 The report as a JSON document. Release the string with
 [`cvs_string_free`].

 # Safety
 `handle` must be a live report; `json` writable.
 */
enum CvsStatus cvs_report_to_json(const struct CvsReport *handle, char **json);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void cvs_string_free(char *s);

/*
 Empirical c-index of `scores` against 0/1 labels, with its
 placement-value variance estimate (`variance` may be NULL).

 # Safety
 `scores` and `labels` must point to `n` values; `cindex` writable.
 */
enum CvsStatus cvs_cindex(const double *scores,
                          const uint8_t *labels,
                          size_t n,
                          double *cindex,
                          double *variance);

/*
 Starts an ensemble for a dataset with `n` rows and the given targets
 (0/1 for the c-index).

 # Safety
 `targets` must point to `n` doubles; `out_handle` writable.
 */
enum CvsStatus cvs_builder_new(const double *targets,
                               size_t n,
                               enum CvsLossKind kind,
                               struct CvsEnsembleBuilder **out_handle);

/*
 Adds the next split: the 0-based test rows (`n2` of them, distinct)
 and the model's scores on those rows, in the same order. Predictions
 for MSPE, risk scores for the c-index. The first split added is split 0.

 # Safety
 `builder` must be live; `test_rows` and `scores` must point to `n2`
 values.
 */
enum CvsStatus cvs_builder_add_split(struct CvsEnsembleBuilder *builder,
                                     const size_t *test_rows,
                                     const double *scores,
                                     size_t n2);

/*
 Builds the ensemble (estimates and covariance) from the splits added
 so far. The builder stays usable.

 # Safety
 `builder` must be live; `out_handle` writable.
 */
enum CvsStatus cvs_builder_finish(const struct CvsEnsembleBuilder *builder,
                                  struct CvsEnsemble **out_handle);

/*
 Releases a builder. NULL is ignored.

 # Safety
 `builder` must come from this library and not be used afterwards.
 */
void cvs_builder_free(struct CvsEnsembleBuilder *builder);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVSHRINK_H */
