/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef FOCUS_H
#define FOCUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum FocusStatus {
  FOCUS_STATUS_OK = 0,
  FOCUS_STATUS_NULL_POINTER = 1,
  FOCUS_STATUS_INVALID_ARGUMENT = 2,
  FOCUS_STATUS_NON_FINITE_INPUT = 3,
  FOCUS_STATUS_INTERNAL = 4,
} FocusStatus;

/**
 * Opaque detector handle.
 */
typedef struct FocusDetector FocusDetector;

/**
 * Outcome of one observation. `tau_hat` is meaningful only when
 * `has_tau_hat` is true.
 */
typedef struct FocusStepOutcome {
  uint64_t t;
  double statistic;
  uint64_t tau_hat;
  bool has_tau_hat;
  bool detected;
} FocusStepOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Known-mean detector for data with pre-change mean `mean0` and scale `sigma`.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum FocusStatus focus_detector_new_focus0(double threshold,
                                           double mean0,
                                           double sigma,
                                           struct FocusDetector **out);

/**
 * Unknown-mean detector with scale `sigma`.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum FocusStatus focus_detector_new_focus(double threshold,
                                          double sigma,
                                          struct FocusDetector **out);

/**
 * Outlier-robust detector with loss cap `cap` (may be `INFINITY`).
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum FocusStatus focus_detector_new_rfocus(double cap,
                                           double threshold,
                                           double sigma,
                                           struct FocusDetector **out);

/**
 * Feeds one observation. `out` may be null when the outcome is not needed.
 *
 * # Safety
 * `det` must be a live handle; `out` must be null or writable.
 */
enum FocusStatus focus_detector_step(struct FocusDetector *det,
                                     double x,
                                     struct FocusStepOutcome *out);

/**
 * Feeds `len` observations, stopping after the first detection. Writes the
 * number consumed to `consumed` and the last outcome to `last` (either may be
 * null).
 *
 * # Safety
 * `det` must be a live handle; `xs` must point to `len` readable doubles
 * (or be null with `len == 0`); `consumed` and `last` must be null or writable.
 */
enum FocusStatus focus_detector_step_many(struct FocusDetector *det,
                                          const double *xs,
                                          uintptr_t len,
                                          uintptr_t *consumed,
                                          struct FocusStepOutcome *last);

/**
 * Forgets all observations; the configuration is kept.
 *
 * # Safety
 * `det` must be null or a live handle.
 */
enum FocusStatus focus_detector_reset(struct FocusDetector *det);

/**
 * # Safety
 * `det` must be null or a live handle.
 */
enum FocusStatus focus_detector_set_threshold(struct FocusDetector *det, double threshold);

/**
 * Number of observations consumed since creation or the last reset.
 *
 * # Safety
 * `det` must be null or a live handle; `out` must be null or writable.
 */
enum FocusStatus focus_detector_observations(const struct FocusDetector *det, uint64_t *out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `det` must be null or a handle not yet freed.
 */
void focus_detector_free(struct FocusDetector *det);

/**
 * Static, NUL-terminated description of a status code.
 */
const char *focus_status_message(enum FocusStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOCUS_H */
