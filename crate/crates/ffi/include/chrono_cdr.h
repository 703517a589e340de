#ifndef CHRONO_CDR_H
#define CHRONO_CDR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcdrStatus {
  CCDR_STATUS_OK = 0,
  CCDR_STATUS_NULL_POINTER = 1,
  CCDR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The quantity has no value for this input, e.g. a constant series.
   */
  CCDR_STATUS_UNDEFINED = 3,
  CCDR_STATUS_MISSING_ARTIFACT = 4,
  CCDR_STATUS_IO = 5,
  CCDR_STATUS_PANIC = 6,
} CcdrStatus;

/**
 * Opaque pipeline run bound to a loaded configuration.
 */
typedef struct CcdrRun CcdrRun;

/**
 * Opaque Voronoi tessellation.
 */
typedef struct CcdrTessellation CcdrTessellation;

/**
 * Edge detection settings. Times are minutes after local midnight; the
 * bed window may extend past 1440.
 */
typedef struct CcdrEdgeParams {
  double half_fraction;
  double wake_start_min;
  double wake_end_min;
  double bed_start_min;
  double bed_end_min;
  double noise_floor;
} CcdrEdgeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The caller owns the
 * returned string.
 */
char *ccdr_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ccdr_string_free(char *s);

/**
 * Great-circle distance in km.
 */
double ccdr_distance_km(double lat1, double lon1, double lat2, double lon2);

/**
 * Radius of gyration in km of `n` weighted locations.
 *
 * # Safety
 * Each array must hold `n` readable elements; `out` must be writable.
 */
enum CcdrStatus ccdr_gyration_km(const double *lats,
                                 const double *lons,
                                 const uint32_t *counts,
                                 size_t n,
                                 double *out);

/**
 * Visit entropy over distinct locations, normalized by ln of the total
 * visit count.
 *
 * # Safety
 * Each array must hold `n` readable elements; `out` must be writable.
 */
enum CcdrStatus ccdr_entropy(const double *lats,
                             const double *lons,
                             const uint32_t *counts,
                             size_t n,
                             double *out);

/**
 * Sample Pearson correlation. Returns `Undefined` for constant input or
 * fewer than two points.
 *
 * # Safety
 * `x` and `y` must hold `n` readable elements; `out` must be writable.
 */
enum CcdrStatus ccdr_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * Centered moving average over `window` samples, shrinking at the ends.
 * `out` may alias `values`.
 *
 * # Safety
 * `values` and `out` must hold `n` elements.
 */
enum CcdrStatus ccdr_smooth(const double *values, size_t n, size_t window, double *out);

struct CcdrEdgeParams ccdr_edge_params_default(void);

/**
 * Wake and bed times of one smoothed day. `values[k]` sits at minute
 * `10*k + offset_min`; pass up to two days so late falls are visible.
 * Undetected edges are written as NaN.
 *
 * # Safety
 * `values` must hold `n` elements; `params`, `wake` and `bed` must be valid.
 */
enum CcdrStatus ccdr_detect_edges(const double *values,
                                  size_t n,
                                  double offset_min,
                                  const struct CcdrEdgeParams *params,
                                  double *wake,
                                  double *bed);

/**
 * Voronoi cells of `n` sites clipped to their bounding box grown by
 * `pad_km`. Site `i` keeps index `i`.
 *
 * # Safety
 * `lats` and `lons` must hold `n` elements; `out` must be writable.
 */
enum CcdrStatus ccdr_tessellation_new(const double *lats,
                                      const double *lons,
                                      size_t n,
                                      double pad_km,
                                      struct CcdrTessellation **out);

/**
 * # Safety
 * `t` must come from [`ccdr_tessellation_new`] and not have been freed.
 */
void ccdr_tessellation_free(struct CcdrTessellation *t);

/**
 * Index of the cell containing the point, or -1 outside the box.
 *
 * # Safety
 * `t` must be a live tessellation and `out` writable.
 */
enum CcdrStatus ccdr_tessellation_locate(const struct CcdrTessellation *t,
                                         double lat,
                                         double lon,
                                         int64_t *out);

/**
 * Area in km² of cell `i`.
 *
 * # Safety
 * `t` must be a live tessellation and `out` writable.
 */
enum CcdrStatus ccdr_tessellation_area_km2(const struct CcdrTessellation *t, size_t i, double *out);

/**
 * Loads and validates a run configuration. `threads` of 0 uses all cores.
 *
 * # Safety
 * `config_path` must be a NUL-terminated UTF-8 path; `out` writable.
 */
enum CcdrStatus ccdr_run_open(const char *config_path, size_t threads, struct CcdrRun **out);

/**
 * # Safety
 * `run` must come from [`ccdr_run_open`] and not have been freed.
 */
void ccdr_run_free(struct CcdrRun *run);

/**
 * Runs one step by its command-line name, e.g. `"working-hours"`, or
 * `"all"` for every step in order.
 *
 * # Safety
 * `run` must be live; `step` NUL-terminated.
 */
enum CcdrStatus ccdr_run_step(const struct CcdrRun *run, const char *step);

/**
 * Effective configuration as flat JSON. The caller owns the string.
 *
 * # Safety
 * `run` must be live.
 */
char *ccdr_run_effective_config(const struct CcdrRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHRONO_CDR_H */
