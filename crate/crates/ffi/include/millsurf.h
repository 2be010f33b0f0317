#ifndef MILLSURF_H
#define MILLSURF_H

/* Generated by cbindgen at build time. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Radius form selector for `millsurf_effective_radius`.
 */
typedef enum MillsurfRadiusForm {
  MILLSURF_RADIUS_FORM_AS_PRINTED = 0,
  MILLSURF_RADIUS_FORM_VARIANT = 1,
} MillsurfRadiusForm;

/**
 * Result of every fallible call.
 */
typedef enum MillsurfStatus {
  MILLSURF_STATUS_OK = 0,
  MILLSURF_STATUS_NULL_POINTER = 1,
  MILLSURF_STATUS_INVALID_UTF8 = 2,
  MILLSURF_STATUS_DOMAIN = 3,
  MILLSURF_STATUS_SINGULAR_ORIENTATION = 4,
  MILLSURF_STATUS_RESOURCE = 5,
  MILLSURF_STATUS_CONFIG = 6,
  MILLSURF_STATUS_PARSE = 7,
  MILLSURF_STATUS_INPUT = 8,
  MILLSURF_STATUS_IO = 9,
  MILLSURF_STATUS_EMPTY_RESULT = 10,
  MILLSURF_STATUS_RANK_DEFICIENT = 11,
  MILLSURF_STATUS_UNBALANCED = 12,
  MILLSURF_STATUS_BUFFER_TOO_SMALL = 13,
  MILLSURF_STATUS_PANIC = 14,
} MillsurfStatus;

/**
 * Branch selector for `millsurf_predict_sz`.
 */
typedef enum MillsurfSzBranch {
  MILLSURF_SZ_BRANCH_AS_PRINTED = 0,
  MILLSURF_SZ_BRANCH_HC_ADDITIVE_SWAPPED = 1,
} MillsurfSzBranch;

/**
 * Key/value configuration, interpreted when a simulation runs.
 */
typedef struct MillsurfConfig MillsurfConfig;

/**
 * Height field in µm on a regular grid in mm.
 */
typedef struct MillsurfHeightField MillsurfHeightField;

/**
 * Areal parameters of a leveled field. Undefined entries are NaN.
 */
typedef struct MillsurfArealParams {
  /**
   * µm
   */
  double sz;
  double sa;
  double sq;
  double sku;
  double ssk;
  /**
   * µm
   */
  double sv;
  /**
   * 1/mm²
   */
  double sds;
  /**
   * mm
   */
  double sal;
  /**
   * degrees
   */
  double std;
} MillsurfArealParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next call on the same thread.
 */
const char *millsurf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *millsurf_version(void);

/**
 * Build a field from `nx * ny` row-major heights (µm, NaN = masked).
 *
 * # Safety
 * `z` must point to `nx * ny` readable doubles and `out` must be writable.
 */
enum MillsurfStatus millsurf_heightfield_new(size_t nx,
                                             size_t ny,
                                             double dx,
                                             double dy,
                                             const double *z,
                                             struct MillsurfHeightField **out);

/**
 * Read a height-field CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum MillsurfStatus millsurf_heightfield_read_csv(const char *path,
                                                  struct MillsurfHeightField **out);

/**
 * Write the field as CSV.
 *
 * # Safety
 * `hf` must be a live handle and `path` a NUL-terminated string.
 */
enum MillsurfStatus millsurf_heightfield_write_csv(const struct MillsurfHeightField *hf,
                                                   const char *path);

/**
 * Grid size and spacing (mm). Any output pointer may be null.
 *
 * # Safety
 * `hf` must be a live handle; non-null outputs must be writable.
 */
enum MillsurfStatus millsurf_heightfield_shape(const struct MillsurfHeightField *hf,
                                               size_t *nx,
                                               size_t *ny,
                                               double *dx,
                                               double *dy);

/**
 * Copy the row-major heights into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `hf` must be a live handle and `buf` must hold `len` writable doubles.
 */
enum MillsurfStatus millsurf_heightfield_copy_heights(const struct MillsurfHeightField *hf,
                                                      double *buf,
                                                      size_t len);

/**
 * # Safety
 * `hf` must be null or a handle not yet freed.
 */
void millsurf_heightfield_free(struct MillsurfHeightField *hf);

/**
 * Level the field and compute the areal parameters. `sal_threshold` ≤ 0
 * selects the default autocorrelation threshold.
 *
 * # Safety
 * `hf` must be a live handle and `out` writable.
 */
enum MillsurfStatus millsurf_areal_params(const struct MillsurfHeightField *hf,
                                          double sal_threshold,
                                          struct MillsurfArealParams *out);

/**
 * Equivalent cutting radius (mm) for yaw and tilt in degrees.
 *
 * # Safety
 * `out` must be writable.
 */
enum MillsurfStatus millsurf_effective_radius(double yaw_deg,
                                              double tilt_deg,
                                              double radius_mm,
                                              double corner_radius_mm,
                                              enum MillsurfRadiusForm form,
                                              double *out);

/**
 * Closed-form Sz estimate in mm; all inputs in mm.
 *
 * # Safety
 * `out` must be writable.
 */
enum MillsurfStatus millsurf_predict_sz(double fz_mm,
                                        double scallop_mm,
                                        double req_mm,
                                        double corner_radius_mm,
                                        enum MillsurfSzBranch branch,
                                        double *out);

/**
 * Empty configuration: every key takes its default.
 *
 * # Safety
 * `out` must be writable.
 */
enum MillsurfStatus millsurf_config_new(struct MillsurfConfig **out);

/**
 * Read a configuration file. Relative paths inside it resolve against
 * its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum MillsurfStatus millsurf_config_read(const char *path, struct MillsurfConfig **out);

/**
 * Apply one `section.key=value` override.
 *
 * # Safety
 * `cfg` must be a live handle and `assignment` a NUL-terminated string.
 */
enum MillsurfStatus millsurf_config_set(struct MillsurfConfig *cfg, const char *assignment);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void millsurf_config_free(struct MillsurfConfig *cfg);

/**
 * Run the simulation described by `cfg` and return the cut height field.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum MillsurfStatus millsurf_simulate(const struct MillsurfConfig *cfg,
                                      struct MillsurfHeightField **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MILLSURF_H */
