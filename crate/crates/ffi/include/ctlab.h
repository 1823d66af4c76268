#ifndef CTLAB_H
#define CTLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum {
  CTLAB_STATUS_OK = 0,
  CTLAB_STATUS_NULL_POINTER = 1,
  CTLAB_STATUS_INVALID_INPUT = 2,
  CTLAB_STATUS_RECOGNITION_FAILURE = 3,
  CTLAB_STATUS_CONSISTENCY_FAILURE = 4,
  CTLAB_STATUS_NUMERIC_FAILURE = 5,
  CTLAB_STATUS_VERIFICATION_FAILED = 6,
  CTLAB_STATUS_NOT_FOUND = 7,
  CTLAB_STATUS_PANIC = 99,
} CtlabStatus;

typedef enum {
  CTLAB_VERDICT_NO_RATIONAL_SOLUTIONS = 0,
  CTLAB_VERDICT_EXPECT_SOLUTIONS = 1,
  CTLAB_VERDICT_UNKNOWN = 2,
} CtlabVerdict;

/**
 * Opaque result of `ctlab_compute`.
 */
typedef struct CtlabReport CtlabReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the next failing call.
 */
const char *ctlab_last_error(void);

/**
 * Library version as a static string.
 */
const char *ctlab_version(void);

/**
 * Computes `S_D` (and `T_D` when defined) at `prec_bits`.
 * `seed` selects class representatives; 0 uses the default scan.
 * `point_height` bounds the corroborating point search (0 disables it).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
CtlabStatus ctlab_compute(uint64_t d,
                          uint32_t prec_bits,
                          uint64_t seed,
                          uint64_t point_height,
                          CtlabReport **out);

/**
 * # Safety
 * `report` must come from `ctlab_compute` and not be freed already; null is ignored.
 */
void ctlab_report_free(CtlabReport *report);

/**
 * `S_D` as `"p/q"`; free with `ctlab_string_free`. Null on a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
char *ctlab_report_s_d(const CtlabReport *report);

/**
 * `T_D` rendered (`"-3·√-3"`, `"9"`), or null when not defined for this `D`.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
char *ctlab_report_t_d(const CtlabReport *report);

/**
 * Tamagawa product `c_3D`; 0 on a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
uint64_t ctlab_report_c3d(const CtlabReport *report);

/**
 * # Safety
 * `report` must be a live handle or null.
 */
CtlabVerdict ctlab_report_verdict(const CtlabReport *report);

/**
 * The full record as JSON, in the cache format.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
char *ctlab_report_json(const CtlabReport *report);

/**
 * Smallest point on `x³ + y³ = d` with denominator at most `height`, written as `"x,y"`.
 * Returns `NotFound` (and leaves `out` untouched) when there is none.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one string pointer.
 */
CtlabStatus ctlab_point_search(uint64_t d, uint64_t height, char **out);

/**
 * Runs a verification suite by name; the report (JSON array) goes to `out`.
 * Returns `VerificationFailed` when any identity fails; `out` is filled either way.
 *
 * # Safety
 * `suite` must be a NUL-terminated string; `out` must be writable.
 */
CtlabStatus ctlab_verify(const char *suite, uint32_t prec_bits, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed already; null is ignored.
 */
void ctlab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTLAB_H */
