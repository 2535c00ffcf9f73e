#ifndef ISAMP_H
#define ISAMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IsampStatus {
  ISAMP_STATUS_OK = 0,
  ISAMP_STATUS_NULL_POINTER = 1,
  ISAMP_STATUS_INVALID_ARGUMENT = 2,
  ISAMP_STATUS_DOMAIN = 3,
  ISAMP_STATUS_NUMERICAL = 4,
  ISAMP_STATUS_INIT = 5,
  ISAMP_STATUS_DESIGN = 6,
  ISAMP_STATUS_STUDY = 7,
  ISAMP_STATUS_DATASET = 8,
  ISAMP_STATUS_CONFIG = 9,
  ISAMP_STATUS_IO = 10,
  ISAMP_STATUS_PANIC = 11,
} IsampStatus;

typedef enum IsampModel {
  ISAMP_MODEL_LINEAR = 0,
  ISAMP_MODEL_PROBIT = 1,
  ISAMP_MODEL_SPLINE = 2,
  ISAMP_MODEL_WEIGHTS_ONLY = 3,
} IsampModel;

typedef enum IsampMethod {
  ISAMP_METHOD_FULL = 0,
  ISAMP_METHOD_PSEUDO = 1,
  ISAMP_METHOD_IGNORE = 2,
} IsampMethod;

typedef enum IsampStudyMethod {
  ISAMP_STUDY_METHOD_FULL = 0,
  ISAMP_STUDY_METHOD_PSEUDO = 1,
  ISAMP_STUDY_METHOD_SRS = 2,
} IsampStudyMethod;

typedef struct IsampDataset IsampDataset;

typedef struct IsampDraws IsampDraws;

typedef struct IsampMetrics IsampMetrics;

typedef struct IsampPosterior IsampPosterior;

/**
 * Sampler settings; see [`isamp_chain_config_default`].
 */
typedef struct IsampChainConfig {
  size_t n_warmup;
  size_t n_draws;
  double target_accept;
  size_t max_leapfrog;
  uint64_t seed;
  double init_jitter;
} IsampChainConfig;

typedef struct IsampMethodMetrics {
  double bias;
  double mse;
  double coverage_95;
  double avg_ci_length;
} IsampMethodMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *isamp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *isamp_version(void);

struct IsampChainConfig isamp_chain_config_default(void);

struct IsampDataset *isamp_dataset_new(void);

/**
 * Appends one observation. `x_y` may be empty (`p_y = 0`) only for the
 * weights-only model.
 *
 * # Safety
 * `ds` must come from this library; `x_y`/`x_pi` must point to `p_y`/`p_pi` doubles.
 */
enum IsampStatus isamp_dataset_push(struct IsampDataset *ds,
                                    double y,
                                    double log_pi,
                                    const double *x_y,
                                    size_t p_y,
                                    const double *x_pi,
                                    size_t p_pi);

/**
 * Loads a CSV dataset described by a JSON dataset spec.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out` must be writable.
 */
enum IsampStatus isamp_dataset_load(const char *spec_json, struct IsampDataset **out);

/**
 * Number of observations, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t isamp_dataset_len(const struct IsampDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void isamp_dataset_free(struct IsampDataset *ds);

/**
 * Builds the log posterior of a model on a dataset. `spline_b`/`spline_k`
 * are used only by the spline model.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum IsampStatus isamp_posterior_new(const struct IsampDataset *ds,
                                     enum IsampModel model,
                                     enum IsampMethod method,
                                     size_t spline_b,
                                     size_t spline_k,
                                     struct IsampPosterior **out);

/**
 * Unconstrained parameter dimension, or 0 for a null handle.
 *
 * # Safety
 * `post` must be null or a live handle.
 */
size_t isamp_posterior_dim(const struct IsampPosterior *post);

/**
 * Log posterior at `x` (length `dim`); when `grad` is non-null the gradient
 * is written there.
 *
 * # Safety
 * `x` must hold `dim` doubles, `grad` null or `dim` writable doubles.
 */
enum IsampStatus isamp_posterior_log_density(const struct IsampPosterior *post,
                                             const double *x,
                                             size_t dim,
                                             double *grad,
                                             double *out_value);

/**
 * # Safety
 * `post` must be null or a handle not yet freed.
 */
void isamp_posterior_free(struct IsampPosterior *post);

/**
 * Runs one NUTS chain. `init` may be null (start at zero) or hold `dim` doubles.
 *
 * # Safety
 * Pointers must be valid as documented; `out` must be writable.
 */
enum IsampStatus isamp_sample(const struct IsampPosterior *post,
                              const struct IsampChainConfig *config,
                              const double *init,
                              struct IsampDraws **out);

/**
 * # Safety
 * `d` must be null or a live handle.
 */
size_t isamp_draws_count(const struct IsampDraws *d);

/**
 * # Safety
 * `d` must be null or a live handle.
 */
size_t isamp_draws_dim(const struct IsampDraws *d);

/**
 * Mean acceptance statistic of the post-warmup transitions.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
double isamp_draws_accept_rate(const struct IsampDraws *d);

/**
 * # Safety
 * `d` must be null or a live handle.
 */
size_t isamp_draws_divergences(const struct IsampDraws *d);

/**
 * Copies the draws row-major (count x dim, unconstrained scale) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` writable doubles.
 */
enum IsampStatus isamp_draws_copy(const struct IsampDraws *d, double *buf, size_t len);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void isamp_draws_free(struct IsampDraws *d);

/**
 * Runs a linear-scenario Monte Carlo study described by a JSON scenario
 * config. `threads = 0` uses `ISAMP_THREADS` or all cores.
 *
 * # Safety
 * `scenario_json` must be NUL-terminated; `out` must be writable.
 */
enum IsampStatus isamp_run_study(const char *scenario_json,
                                 size_t threads,
                                 struct IsampMetrics **out);

/**
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum IsampStatus isamp_metrics_get(const struct IsampMetrics *m,
                                   enum IsampStudyMethod method,
                                   struct IsampMethodMetrics *out);

/**
 * Replicates that failed and were excluded.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t isamp_metrics_failed(const struct IsampMetrics *m);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void isamp_metrics_free(struct IsampMetrics *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISAMP_H */
