#ifndef MSSTARCH_H
#define MSSTARCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_NUMERICAL = 3,
  MS_STATUS_IO = 4,
  MS_STATUS_PARSE = 5,
  MS_STATUS_BUFFER_TOO_SMALL = 6,
  MS_STATUS_PANIC = 7,
} MsStatus;

/**
 * Result of a fit.
 */
typedef struct MsFit MsFit;

/**
 * Panel of log-squared observations.
 */
typedef struct MsPanel MsPanel;

/**
 * Spatial weight matrix.
 */
typedef struct MsWeights MsWeights;

typedef struct MsRegimeParams {
  double rho;
  double gamma;
  double delta;
  double phi;
} MsRegimeParams;

typedef struct MsModelParams {
  struct MsRegimeParams regimes[2];
  /**
   * Stay probability of regime 1.
   */
  double p;
  /**
   * Stay probability of regime 2.
   */
  double q;
  double sigma2;
} MsModelParams;

/**
 * Summary of a fit.
 */
typedef struct MsFitSummary {
  struct MsModelParams params;
  double loglik;
  double bic;
  size_t n_params;
  bool converged;
} MsFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL after a success.
 * The pointer stays valid until the next call into the library.
 */
const char *ms_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/**
 * The reference two-regime parameters (intercepts on the simulation scale).
 *
 * # Safety
 * `out` must be null or point to writable memory for one `MsModelParams`.
 */
enum MsStatus ms_reference_params(struct MsModelParams *out);

/**
 * Queen-contiguity grid, optionally row-normalized.
 *
 * # Safety
 * `out` must be null or point to writable storage for a handle.
 */
enum MsStatus ms_weights_queen_grid(size_t rows,
                                    size_t cols,
                                    bool normalize,
                                    struct MsWeights **out);

/**
 * Reads a headerless weight CSV.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` as for other constructors.
 */
enum MsStatus ms_weights_read_csv(const char *path, struct MsWeights **out);

/**
 * Builds weights from a dense row-major `n x n` array.
 *
 * # Safety
 * `values` must be null or point to `n * n` readable doubles.
 */
enum MsStatus ms_weights_from_values(const double *values, size_t n, struct MsWeights **out);

/**
 * Number of locations, or 0 for a null handle.
 *
 * # Safety
 * `w` must be null or a live handle.
 */
size_t ms_weights_n(const struct MsWeights *w);

/**
 * # Safety
 * `w` must be null or a handle not freed before.
 */
void ms_weights_free(struct MsWeights *w);

/**
 * Panel of log-squared values from a time-major `t x n` array.
 *
 * # Safety
 * `values` must be null or point to `t * n` readable doubles.
 */
enum MsStatus ms_panel_from_values(const double *values, size_t t, size_t n, struct MsPanel **out);

/**
 * Reads a panel CSV. With `log_squared` false the file holds observations
 * and is transformed with the default zero policy.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string.
 */
enum MsStatus ms_panel_read_csv(const char *path, bool log_squared, struct MsPanel **out);

/**
 * Writes `T` and `n` of a panel.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum MsStatus ms_panel_dims(const struct MsPanel *panel, size_t *t, size_t *n);

/**
 * Copies the time-major values into `buf` of length `len >= T * n`.
 *
 * # Safety
 * `buf` must be null or point to `len` writable doubles.
 */
enum MsStatus ms_panel_values(const struct MsPanel *panel, double *buf, size_t len);

/**
 * # Safety
 * `panel` must be null or a handle not freed before.
 */
void ms_panel_free(struct MsPanel *panel);

/**
 * Simulates `t` periods. `states`, if not null, receives the 1-based regime
 * of each period and must hold `t` bytes.
 *
 * # Safety
 * All pointers must be null or valid for the stated sizes.
 */
enum MsStatus ms_simulate(const struct MsModelParams *params,
                          const struct MsWeights *w,
                          size_t t,
                          size_t burn_in,
                          uint64_t seed,
                          struct MsPanel **out,
                          uint8_t *states);

/**
 * Log-likelihood with the chain started from its stationary distribution.
 *
 * # Safety
 * All pointers must be null or valid.
 */
enum MsStatus ms_loglik(const struct MsModelParams *params,
                        const struct MsPanel *panel,
                        const struct MsWeights *w,
                        double *out);

/**
 * Fits the two-regime model (`two_regime` true) or the one-regime model.
 *
 * # Safety
 * All pointers must be null or valid.
 */
enum MsStatus ms_fit(const struct MsPanel *panel,
                     const struct MsWeights *w,
                     bool two_regime,
                     size_t n_starts,
                     uint64_t seed,
                     struct MsFit **out);

/**
 * # Safety
 * Pointers must be null or valid.
 */
enum MsStatus ms_fit_summary(const struct MsFit *fit, struct MsFitSummary *out);

/**
 * Copies estimates and standard errors (NaN when unavailable) into buffers
 * of length `len >= n_params`. Either buffer may be null.
 *
 * # Safety
 * Non-null buffers must hold `len` writable doubles.
 */
enum MsStatus ms_fit_estimates(const struct MsFit *fit,
                               double *estimates,
                               double *std_errors,
                               size_t len);

/**
 * # Safety
 * `fit` must be null or a handle not freed before.
 */
void ms_fit_free(struct MsFit *fit);

/**
 * Filtered and smoothed probabilities, `T x 2` row-major, written to
 * buffers of length `len >= 2 * T`. Either buffer may be null.
 *
 * # Safety
 * Non-null buffers must hold `len` writable doubles.
 */
enum MsStatus ms_smooth(const struct MsModelParams *params,
                        const struct MsPanel *panel,
                        const struct MsWeights *w,
                        double *filtered,
                        double *smoothed,
                        size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSSTARCH_H */
