#ifndef APPRAISAL_H
#define APPRAISAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AppraisalStatus {
  APPRAISAL_STATUS_OK = 0,
  APPRAISAL_STATUS_NULL_POINTER = 1,
  APPRAISAL_STATUS_INVALID_INPUT = 2,
  APPRAISAL_STATUS_LENGTH_MISMATCH = 3,
  APPRAISAL_STATUS_SINGULAR = 4,
  APPRAISAL_STATUS_RANK_DEFICIENT = 5,
  APPRAISAL_STATUS_PARSE = 6,
  APPRAISAL_STATUS_MISSING_FEATURE = 7,
  APPRAISAL_STATUS_PANIC = 8,
  APPRAISAL_STATUS_OTHER = 9,
} AppraisalStatus;

typedef struct AppraisalKriging AppraisalKriging;

typedef struct AppraisalOls AppraisalOls;

typedef struct AppraisalRuleFit AppraisalRuleFit;

/**
 * Fit statistics of an OLS handle.
 */
typedef struct AppraisalOlsStats {
  size_t n;
  double r2;
  double r2_adj;
  double f_stat;
  double f_pvalue;
  double durbin_watson;
  double jarque_bera;
  double jb_pvalue;
  double condition_number;
} AppraisalOlsStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *appraisal_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *appraisal_last_error(void);

/**
 * Fits `y = b0 + X b` by least squares. `x` is `n_rows × n_cols`.
 *
 * # Safety
 * `x` must hold `n_rows * n_cols` doubles, `y` `n_rows`, and `out` must be
 * writable.
 */
enum AppraisalStatus appraisal_ols_fit(const double *x,
                                       size_t n_rows,
                                       size_t n_cols,
                                       const double *y,
                                       struct AppraisalOls **out);

/**
 * # Safety
 * `h` must come from [`appraisal_ols_fit`]; `out` must be writable.
 */
enum AppraisalStatus appraisal_ols_n_features(const struct AppraisalOls *h, size_t *out);

/**
 * Copies the intercept and `len` slope coefficients; `len` must equal the
 * feature count. `std_errors` may be null, otherwise it receives
 * `len + 1` values ordered `[intercept, slopes...]`.
 *
 * # Safety
 * Output pointers must be writable for the stated lengths.
 */
enum AppraisalStatus appraisal_ols_coefficients(const struct AppraisalOls *h,
                                                double *intercept,
                                                double *coefficients,
                                                double *std_errors,
                                                size_t len);

/**
 * # Safety
 * `h` must be a live OLS handle and `out` writable.
 */
enum AppraisalStatus appraisal_ols_stats(const struct AppraisalOls *h,
                                         struct AppraisalOlsStats *out);

/**
 * # Safety
 * `x` holds `n_rows * n_cols` doubles and `out` `n_rows` writable doubles.
 */
enum AppraisalStatus appraisal_ols_predict(const struct AppraisalOls *h,
                                           const double *x,
                                           size_t n_rows,
                                           size_t n_cols,
                                           double *out);

/**
 * # Safety
 * `h` must be null or a handle from [`appraisal_ols_fit`], freed once.
 */
void appraisal_ols_free(struct AppraisalOls *h);

/**
 * Loads a RuleFit model from its JSON serialization.
 *
 * # Safety
 * `json` must be a NUL-terminated UTF-8 string and `out` writable.
 */
enum AppraisalStatus appraisal_rulefit_load_json(const char *json, struct AppraisalRuleFit **out);

/**
 * # Safety
 * `h` must be a live RuleFit handle and `out` writable.
 */
enum AppraisalStatus appraisal_rulefit_n_features(const struct AppraisalRuleFit *h, size_t *out);

/**
 * Name of input column `i`, owned by the handle; null when out of range.
 *
 * # Safety
 * `h` must be null or a live RuleFit handle.
 */
const char *appraisal_rulefit_feature_name(const struct AppraisalRuleFit *h, size_t i);

/**
 * # Safety
 * `h` must be a live RuleFit handle and `out` writable.
 */
enum AppraisalStatus appraisal_rulefit_intercept(const struct AppraisalRuleFit *h, double *out);

/**
 * Predicts in the model's target units. Columns of `x` follow
 * [`appraisal_rulefit_feature_name`] order.
 *
 * # Safety
 * `x` holds `n_rows * n_cols` doubles and `out` `n_rows` writable doubles.
 */
enum AppraisalStatus appraisal_rulefit_predict(const struct AppraisalRuleFit *h,
                                               const double *x,
                                               size_t n_rows,
                                               size_t n_cols,
                                               double *out);

/**
 * # Safety
 * `h` must be null or a handle from [`appraisal_rulefit_load_json`], freed once.
 */
void appraisal_rulefit_free(struct AppraisalRuleFit *h);

/**
 * Ordinary kriging with an exponential variogram. `xy` holds `n` points as
 * `(x, y)` pairs in meters. `neighborhood = 0` keeps the default.
 *
 * # Safety
 * `xy` holds `2n` doubles, `values` `n`, and `out` is writable.
 */
enum AppraisalStatus appraisal_kriging_new(const double *xy,
                                           const double *values,
                                           size_t n,
                                           double nugget,
                                           double partial_sill,
                                           double range,
                                           size_t neighborhood,
                                           struct AppraisalKriging **out);

/**
 * Kriged values at `m` query points; `variances` may be null.
 *
 * # Safety
 * `queries` holds `2m` doubles; `values` (and `variances` if non-null)
 * hold `m` writable doubles.
 */
enum AppraisalStatus appraisal_kriging_predict(const struct AppraisalKriging *h,
                                               const double *queries,
                                               size_t m,
                                               double *values,
                                               double *variances);

/**
 * # Safety
 * `h` must be null or a handle from [`appraisal_kriging_new`], freed once.
 */
void appraisal_kriging_free(struct AppraisalKriging *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APPRAISAL_H */
