#ifndef BOUNDED_LSE_H
#define BOUNDED_LSE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum BlseStatus {
  BLSE_STATUS_OK = 0,
  BLSE_STATUS_NULL_POINTER = 1,
  BLSE_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed case, placement or argument.
   */
  BLSE_STATUS_INVALID_INPUT = 3,
  /**
   * An estimator failed (divergence, singular system, no feasible orthant).
   */
  BLSE_STATUS_NUMERICAL = 4,
  /**
   * Output buffer length does not match the state dimension.
   */
  BLSE_STATUS_BUFFER_SIZE = 5,
  /**
   * Internal panic caught at the boundary.
   */
  BLSE_STATUS_INTERNAL = 6,
} BlseStatus;

/**
 * Network case together with the PMU placement used for estimation.
 */
typedef struct BlseCase BlseCase;

/**
 * One synthetic experiment: perturbed grid, noisy measurements and bounds.
 */
typedef struct BlseTrial BlseTrial;

/**
 * Experiment settings for `blse_trial_generate`.
 */
typedef struct BlseTrialOptions {
  /**
   * Maximum relative line-parameter deviation, in [0, 1).
   */
  double max_rel_dev;
  /**
   * Measurement TVE bound, e.g. 0.01.
   */
  double tve_bound;
  uint64_t seed;
  uint64_t trial;
  /**
   * Take the aggregate parameter bound from the realized parameter change
   * instead of the matrix norm of the affine expansion.
   */
  bool chi_p_from_parameters;
  /**
   * Use the realized parameter deviations as interval radii.
   */
  bool realized_deltas;
} BlseTrialOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *blse_last_error_message(void);

/**
 * Parses a case file. `placement` lists PMU bus ids (whitespace or comma
 * separated); NULL places a PMU at every bus.
 *
 * # Safety
 * `text` must be a NUL-terminated string, `placement` NULL or NUL-terminated,
 * and `out` a valid pointer to writable storage for one handle.
 */
enum BlseStatus blse_case_parse(const char *text, const char *placement, struct BlseCase **out);

/**
 * Loads a bundled system (`case5`, `case14`, `case30`, `case57`, `case118`)
 * with its bundled placement.
 *
 * # Safety
 * `name` must be NUL-terminated and `out` valid for one handle write.
 */
enum BlseStatus blse_case_bundled(const char *name, struct BlseCase **out);

/**
 * Number of buses, or 0 for a NULL handle.
 *
 * # Safety
 * `case` must be NULL or a live handle.
 */
size_t blse_case_bus_count(const struct BlseCase *case_);

/**
 * # Safety
 * `case` must be NULL or a handle not yet freed.
 */
void blse_case_free(struct BlseCase *case_);

/**
 * Defaults matching the command-line tool: 30% deviation, 1% TVE.
 */
struct BlseTrialOptions blse_trial_options_default(void);

/**
 * Perturbs the case, solves the power flow and simulates measurements.
 *
 * # Safety
 * `case` must be a live handle, `options` a valid pointer and `out` valid
 * for one handle write.
 */
enum BlseStatus blse_trial_generate(const struct BlseCase *case_,
                                    const struct BlseTrialOptions *options,
                                    struct BlseTrial **out);

/**
 * State dimension (twice the bus count), or 0 for a NULL handle.
 *
 * # Safety
 * `trial` must be NULL or a live handle.
 */
size_t blse_trial_state_len(const struct BlseTrial *trial);

/**
 * Copies the true state (real parts, then imaginary parts) into `out`.
 *
 * # Safety
 * `trial` must be a live handle and `out` must have room for `len` doubles.
 */
enum BlseStatus blse_trial_true_state(const struct BlseTrial *trial, double *out, size_t len);

/**
 * Interval estimator: per-component lower and upper bounds.
 *
 * # Safety
 * `trial` must be a live handle; `lower` and `upper` must each have room for
 * `len` doubles.
 */
enum BlseStatus blse_estimate_interval(const struct BlseTrial *trial,
                                       double *lower,
                                       double *upper,
                                       size_t len);

/**
 * Convex (bounded data uncertainty) estimator. `theta` may be NULL; it
 * receives the regularization weight, +inf when the zero estimate is optimal.
 *
 * # Safety
 * `trial` must be a live handle, `out` must have room for `len` doubles and
 * `theta` must be NULL or writable.
 */
enum BlseStatus blse_estimate_convex(const struct BlseTrial *trial,
                                     double *out,
                                     size_t len,
                                     double *theta);

/**
 * Fractional-programming estimator. Only small systems are accepted
 * (`max_states` caps the state dimension; 0 selects the default of 24).
 * `xi` may be NULL; it receives the optimal worst-case ratio.
 *
 * # Safety
 * `trial` must be a live handle, `out` must have room for `len` doubles and
 * `xi` must be NULL or writable.
 */
enum BlseStatus blse_estimate_glfp(const struct BlseTrial *trial,
                                   size_t max_states,
                                   double *out,
                                   size_t len,
                                   double *xi);

/**
 * # Safety
 * `trial` must be NULL or a handle not yet freed.
 */
void blse_trial_free(struct BlseTrial *trial);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOUNDED_LSE_H */
