#ifndef SIGSOFTMAX_H
#define SIGSOFTMAX_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function. Zero is success.
 */
typedef enum SsmStatus {
  SSM_STATUS_OK = 0,
  SSM_STATUS_NULL_POINTER = -1,
  SSM_STATUS_INVALID_ARGUMENT = -2,
  SSM_STATUS_DIMENSION_MISMATCH = -3,
  SSM_STATUS_NON_FINITE = -4,
  SSM_STATUS_IO = -5,
  SSM_STATUS_BUFFER_TOO_SMALL = -6,
  SSM_STATUS_PANIC = -99,
} SsmStatus;

/**
 * Activation codes accepted by `ssm_activation_new`.
 */
typedef enum SsmKind {
  SSM_KIND_SOFTMAX = 0,
  SSM_KIND_SIGSOFTMAX = 1,
  SSM_KIND_RELU_BASED = 2,
  SSM_KIND_SIGMOID_BASED = 3,
} SsmKind;

/**
 * Opaque activation configuration.
 */
typedef struct SsmActivation SsmActivation;

/**
 * Opaque synthetic language.
 */
typedef struct SsmLanguage SsmLanguage;

/**
 * Opaque rank analysis result.
 */
typedef struct SsmRankReport SsmRankReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an activation handle. `kind` is an `SsmKind` value; `param` is the sigmoid shift for
 * `SSM_KIND_SIGSOFTMAX` (0 for the plain function), epsilon for
 * `SSM_KIND_RELU_BASED` (1e-8 is the usual choice) and ignored otherwise.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum SsmStatus ssm_activation_new(int32_t kind, double param, struct SsmActivation **out);

/**
 * # Safety
 * `h` must be NULL or a handle from `ssm_activation_new`, freed at most once.
 */
void ssm_activation_free(struct SsmActivation *h);

/**
 * Writes `f(z)` (length `len`) into `out`.
 *
 * # Safety
 * `z` and `out` must point to `len` doubles.
 */
enum SsmStatus ssm_forward(const struct SsmActivation *h, const double *z, size_t len, double *out);

/**
 * Writes `log f(z)` into `out`.
 *
 * # Safety
 * `z` and `out` must point to `len` doubles.
 */
enum SsmStatus ssm_log_forward(const struct SsmActivation *h,
                               const double *z,
                               size_t len,
                               double *out);

/**
 * Writes the `len x len` Jacobian of `log f` at `z`, row-major, into `out`.
 * `large_magnitude` (may be NULL) is set when an entry exceeds 1e6.
 *
 * # Safety
 * `z` must point to `len` doubles, `out` to `len * len` doubles.
 */
enum SsmStatus ssm_log_jacobian(const struct SsmActivation *h,
                                const double *z,
                                size_t len,
                                double *out,
                                bool *large_magnitude);

/**
 * Central-difference estimate of the same Jacobian.
 *
 * # Safety
 * `z` must point to `len` doubles, `out` to `len * len` doubles.
 */
enum SsmStatus ssm_finite_difference_log_jacobian(const struct SsmActivation *h,
                                                  const double *z,
                                                  size_t len,
                                                  double step,
                                                  double *out);

/**
 * Stable `log(1 + exp(x))`.
 */
double ssm_softplus(double x);

/**
 * `log sum exp(z)`; returns -inf for `len == 0` or NULL `z`.
 *
 * # Safety
 * `z` must be NULL or point to `len` doubles.
 */
double ssm_logsumexp(const double *z, size_t len);

/**
 * Singular values, numerical rank and the softmax bound check for a
 * row-major `rows x cols` matrix, typically a log-output matrix whose
 * columns are log-probability vectors.
 *
 * # Safety
 * `values` must point to `rows * cols` doubles; `out` to storage for one pointer.
 */
enum SsmStatus ssm_rank_analyze(const double *values,
                                size_t rows,
                                size_t cols,
                                size_t d,
                                bool has_bias,
                                struct SsmRankReport **out);

/**
 * Random log-output matrix with `M = classes`, hidden width `d` and `samples`
 * Gaussian inputs, followed by its rank analysis. Deterministic in `seed`.
 *
 * # Safety
 * `h` must be a live activation handle; `out` must point to storage for one pointer.
 */
enum SsmStatus ssm_rank_trial(const struct SsmActivation *h,
                              size_t classes,
                              size_t d,
                              size_t samples,
                              bool has_bias,
                              uint64_t seed,
                              struct SsmRankReport **out);

/**
 * Numerical rank, or `SIZE_MAX` for a NULL handle.
 *
 * # Safety
 * `h` must be NULL or a live report handle.
 */
size_t ssm_rank_report_numerical_rank(const struct SsmRankReport *h);

/**
 * # Safety
 * `h` must be NULL or a live report handle.
 */
size_t ssm_rank_report_bound(const struct SsmRankReport *h);

/**
 * # Safety
 * `h` must be NULL or a live report handle.
 */
bool ssm_rank_report_bound_respected(const struct SsmRankReport *h);

/**
 * # Safety
 * `h` must be NULL or a live report handle.
 */
double ssm_rank_report_threshold(const struct SsmRankReport *h);

/**
 * Copies the singular values (descending) into `buf`. `count` receives the
 * total number; `SSM_STATUS_BUFFER_TOO_SMALL` is returned if `capacity` is
 * smaller, with nothing copied.
 *
 * # Safety
 * `buf` must point to `capacity` doubles (may be NULL when `capacity` is 0);
 * `count` must be writable.
 */
enum SsmStatus ssm_rank_report_singular_values(const struct SsmRankReport *h,
                                               double *buf,
                                               size_t capacity,
                                               size_t *count);

/**
 * JSON rendering of the report; free with `ssm_string_free`.
 *
 * # Safety
 * `h` must be a live report handle; `out` must be writable.
 */
enum SsmStatus ssm_rank_report_json(const struct SsmRankReport *h, char **out);

/**
 * # Safety
 * `h` must be NULL or a report handle, freed at most once.
 */
void ssm_rank_report_free(struct SsmRankReport *h);

/**
 * Determinant of the 3x3 log-output matrix built from `k * [1, 2, 0]` for
 * `k = 0, 1, -1`. Nonzero means three independent outputs from a
 * one-dimensional input space.
 *
 * # Safety
 * `h` must be a live activation handle; `determinant` must be writable.
 */
enum SsmStatus ssm_counterexample_determinant(const struct SsmActivation *h, double *determinant);

/**
 * Generated language with `contexts` rows over `classes` tokens whose logits
 * have rank `logit_rank`.
 *
 * # Safety
 * `out` must point to storage for one pointer.
 */
enum SsmStatus ssm_language_generate(size_t contexts,
                                     size_t classes,
                                     size_t logit_rank,
                                     double concentration,
                                     uint64_t seed,
                                     struct SsmLanguage **out);

/**
 * Add-`alpha` bigram language from a UTF-8 text file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SsmStatus ssm_language_from_bigram_file(const char *path,
                                             size_t vocab_cap,
                                             double alpha,
                                             struct SsmLanguage **out);

/**
 * # Safety
 * `h` must be NULL or a live language handle.
 */
size_t ssm_language_contexts(const struct SsmLanguage *h);

/**
 * # Safety
 * `h` must be NULL or a live language handle.
 */
size_t ssm_language_classes(const struct SsmLanguage *h);

/**
 * # Safety
 * `h` must be NULL or a live language handle.
 */
size_t ssm_language_true_log_rank(const struct SsmLanguage *h);

/**
 * Copies the row-major `contexts x classes` true distribution into `buf`.
 *
 * # Safety
 * `buf` must point to `contexts * classes` doubles.
 */
enum SsmStatus ssm_language_true_probs(const struct SsmLanguage *h, double *buf);

/**
 * # Safety
 * `h` must be NULL or a language handle, freed at most once.
 */
void ssm_language_free(struct SsmLanguage *h);

/**
 * Fits one factor model per `(kind, seed)` and returns the comparison table
 * as JSON (free with `ssm_string_free`). `kinds` holds `SsmKind` codes with
 * default parameters.
 *
 * # Safety
 * `kinds` must point to `n_kinds` ints, `seeds` to `n_seeds` values, `out` must be writable.
 */
enum SsmStatus ssm_compare_activations_json(const struct SsmLanguage *h,
                                            size_t d,
                                            bool has_bias,
                                            const int32_t *kinds,
                                            size_t n_kinds,
                                            double learning_rate,
                                            size_t max_epochs,
                                            double tol,
                                            const uint64_t *seeds,
                                            size_t n_seeds,
                                            char **out);

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *ssm_last_error(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from a `*_json` function of this library and not be freed twice.
 */
void ssm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGSOFTMAX_H */
