#ifndef PATHSTAT_H
#define PATHSTAT_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_INVALID_ARGUMENT = 1,
  PS_STATUS_PARSE_ERROR = 2,
  PS_STATUS_CALIBRATION_FAILED = 3,
  PS_STATUS_CONSTRUCTION_FAILED = 4,
  PS_STATUS_IO_ERROR = 5,
  PS_STATUS_NULL_POINTER = 6,
  PS_STATUS_BUFFER_TOO_SMALL = 7,
  PS_STATUS_PANIC = 8,
} PsStatus;

/**
 * Opaque path handle.
 */
typedef struct PsPath PsPath;

/**
 * Opaque analysis report handle.
 */
typedef struct PsReport PsReport;

/**
 * Tail-window density estimate of one pattern.
 */
typedef struct PsDensity {
  double value;
  double oscillation;
  int converged;
  size_t count;
  size_t horizon;
} PsDensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ps_last_error(void);

/**
 * Copies `len` finite values into a new path.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum PsStatus ps_path_from_values(const double *values, size_t len, struct PsPath **out);

/**
 * Generates a path from a spec such as `ar1(0.5,1,7),L=100000`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum PsStatus ps_path_generate(const char *spec, struct PsPath **out);

/**
 * Reads a one-value-per-line path file.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
enum PsStatus ps_path_read(const char *file, struct PsPath **out);

/**
 * Number of values; 0 for a null handle.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
size_t ps_path_len(const struct PsPath *path);

/**
 * Copies the values into `buf`, which must hold `ps_path_len` doubles.
 *
 * # Safety
 * `path` must be a live handle and `buf` writable for `capacity` doubles.
 */
enum PsStatus ps_path_values(const struct PsPath *path, double *buf, size_t capacity);

/**
 * # Safety
 * `path` must be null or a handle not yet freed.
 */
void ps_path_free(struct PsPath *path);

/**
 * Number of occurrences of the pattern `(lo[j], hi[j])_{j<k}` starting
 * below `n`.
 *
 * # Safety
 * `lo` and `hi` must hold `k` doubles; `out` must be writable.
 */
enum PsStatus ps_occurrence_count(const struct PsPath *path,
                                  const double *lo,
                                  const double *hi,
                                  size_t k,
                                  size_t n,
                                  size_t *out);

/**
 * Tail-window density estimate of a pattern.
 *
 * # Safety
 * `lo` and `hi` must hold `k` doubles; `out` must be writable.
 */
enum PsStatus ps_pattern_density(const struct PsPath *path,
                                 const double *lo,
                                 const double *hi,
                                 size_t k,
                                 double tail_fraction,
                                 double tolerance,
                                 struct PsDensity *out);

/**
 * Runs the full diagnostic suite. `config_json` may be null for the
 * defaults or hold a JSON analysis configuration.
 *
 * # Safety
 * `path` must be a live handle, `config_json` null or NUL-terminated, and
 * `out` writable.
 */
enum PsStatus ps_analyze(const struct PsPath *path, const char *config_json, struct PsReport **out);

/**
 * 1 when every diagnostic passed, 0 otherwise (or for a null handle).
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int ps_report_pass(const struct PsReport *report);

/**
 * Number of Property E violations in the report.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t ps_report_violations(const struct PsReport *report);

/**
 * The report as JSON, owned by the handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *ps_report_json(const struct PsReport *report);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void ps_report_free(struct PsReport *report);

/**
 * Slides a built-in test (`threshold_exceedance`, `mean_split`,
 * `variance_split`, `kpss_like`) along the path and reports the upper
 * density of rejections. Any of the output pointers may be null.
 *
 * # Safety
 * `path` must be a live handle, `kind` NUL-terminated, and non-null
 * outputs writable.
 */
enum PsStatus ps_moving_window(const struct PsPath *path,
                               const char *kind,
                               size_t window_size,
                               double tau,
                               double alpha,
                               size_t start,
                               size_t stride,
                               double *upper_density,
                               size_t *rejections,
                               size_t *windows);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* PATHSTAT_H */
