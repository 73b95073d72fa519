#ifndef VARSEL_H
#define VARSEL_H

/* Generated from the Rust sources by the crate build script; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. Anything but `Ok` leaves a human-readable
 * explanation in `vs_last_error_message`.
 */
typedef enum {
  /**
   * The call succeeded.
   */
  VS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  VS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  VS_STATUS_UTF8 = 2,
  /**
   * Arguments were structurally invalid (bad sizes, flags, grids).
   */
  VS_STATUS_USAGE = 3,
  /**
   * The data failed validation against the model or its own shape.
   */
  VS_STATUS_DATA = 4,
  /**
   * The computation broke down numerically.
   */
  VS_STATUS_NUMERICAL = 5,
  /**
   * A file could not be read or written.
   */
  VS_STATUS_IO = 6,
  /**
   * An internal invariant failed; the library state is still sound.
   */
  VS_STATUS_PANIC = 7,
} VsStatus;

/**
 * A fitted model. Opaque to C; create with `vs_fit` or `vs_load`, release
 * with `vs_model_free`.
 */
typedef struct VsModel VsModel;

/**
 * Fitting knobs mirrored from the library. Three-state `int` flags accept
 * -1 (decide from the grid), 0 (off) and 1 (on).
 */
typedef struct {
  /**
   * Convergence tolerance on the variational bound.
   */
  double tol;
  /**
   * Iteration cap per grid point.
   */
  uint64_t maxiter;
  /**
   * Re-estimate the residual variance (-1/0/1).
   */
  int32_t update_sigma;
  /**
   * Re-estimate the prior effect variance (-1/0/1).
   */
  int32_t update_sa;
  /**
   * Re-optimize the logistic approximation factors (-1/0/1).
   */
  int32_t optimize_eta;
  /**
   * Run the second stage that restarts every grid point from the best
   * first-stage fit (0/1).
   */
  int32_t initialize_params;
  /**
   * Pseudo-observations shrinking the estimated prior effect variance.
   */
  double n0;
  /**
   * Shrinkage target for the prior effect variance.
   */
  double sa0;
  /**
   * Posterior draws behind the variance-explained estimate.
   */
  uint64_t nr;
  /**
   * Seed for every randomized summary.
   */
  uint64_t seed;
} VsFitOptions;

/**
 * Fills `options` with the library defaults.
 *
 * # Safety
 * `options` must point to writable memory for one `VsFitOptions`.
 */
VsStatus vs_fit_options_default(VsFitOptions *options);

/**
 * Fits the model over a hyperparameter grid.
 *
 * `x` is the row-major `n` by `p` variable matrix and `y` the length-`n`
 * outcome. `z` may be null when `n_z` is 0, otherwise it is a row-major
 * `n` by `n_z` covariate matrix (without an intercept column, which is
 * always included). `family` is 0 for gaussian, 1 for binomial. `logodds`
 * gives the `n_s` prior log-odds grid points shared by all variables.
 * `sigma` and `sa` are either null (estimate the hyperparameter) or
 * length-`n_s` arrays fixing it per grid point. A null `options` uses the
 * defaults. On success `*out` owns the fitted model.
 *
 * # Safety
 * All non-null pointers must be valid for the extents announced by the
 * size arguments, and `out` must point to writable pointer storage.
 */
VsStatus vs_fit(const double *x,
                size_t n,
                size_t p,
                const double *y,
                const double *z,
                size_t n_z,
                int32_t family,
                const double *logodds,
                size_t n_s,
                const double *sigma,
                const double *sa,
                const VsFitOptions *options,
                VsModel **out);

/**
 * Releases a model handle. Null is allowed and ignored.
 *
 * # Safety
 * `model` must be a handle from this library that has not been freed.
 */
void vs_model_free(VsModel *model);

/**
 * Number of samples the model was fitted to, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vs_model_n_samples(const VsModel *model);

/**
 * Number of candidate variables, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vs_model_n_variables(const VsModel *model);

/**
 * Number of hyperparameter grid points, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t vs_model_n_grid_points(const VsModel *model);

/**
 * Model family: 0 gaussian, 1 binomial, -1 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t vs_model_family(const VsModel *model);

/**
 * Copies the posterior inclusion probabilities into `out` (`len` must be
 * the number of variables).
 *
 * # Safety
 * `model` must be a live handle and `out` writable for `len` doubles.
 */
VsStatus vs_model_pip(const VsModel *model, double *out, size_t len);

/**
 * Copies the model-averaged coefficients into `out` (`len` must be the
 * number of variables).
 *
 * # Safety
 * `model` must be a live handle and `out` writable for `len` doubles.
 */
VsStatus vs_model_beta_mean(const VsModel *model, double *out, size_t len);

/**
 * Copies the normalized grid-point weights into `out` (`len` must be the
 * number of grid points).
 *
 * # Safety
 * `model` must be a live handle and `out` writable for `len` doubles.
 */
VsStatus vs_model_weights(const VsModel *model, double *out, size_t len);

/**
 * Copies the per-grid-point variational bounds into `out` (`len` must be
 * the number of grid points).
 *
 * # Safety
 * `model` must be a live handle and `out` writable for `len` doubles.
 */
VsStatus vs_model_logw(const VsModel *model, double *out, size_t len);

/**
 * Predicts for `n_new` samples. `x` is row-major `n_new` by `p` with the
 * training variable count, and `z`/`n_z` follow the `vs_fit` covariate
 * convention. Gaussian models write predicted outcomes, binomial models
 * write probabilities of the positive class. `len` must equal `n_new`.
 *
 * # Safety
 * All non-null pointers must be valid for the announced extents.
 */
VsStatus vs_predict(const VsModel *model,
                    const double *x,
                    size_t n_new,
                    size_t p,
                    const double *z,
                    size_t n_z,
                    double *out,
                    size_t len);

/**
 * Writes the model to `path` in the library archive format.
 *
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
VsStatus vs_save(const VsModel *model, const char *path);

/**
 * Loads a model archive from `path`. On success `*out` owns the handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable pointer
 * storage.
 */
VsStatus vs_load(const char *path, VsModel **out);

/**
 * Bayes factor for `alt` against `null`; both must come from the same
 * dataset.
 *
 * # Safety
 * Both handles must be live and `out` writable for one double.
 */
VsStatus vs_bayes_factor(const VsModel *null_model, const VsModel *alt_model, double *out);

/**
 * Message behind the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *vs_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *vs_version(void);

#endif  /* VARSEL_H */
