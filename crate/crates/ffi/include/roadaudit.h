#ifndef ROADAUDIT_H
#define ROADAUDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RaStatus {
  RA_STATUS_OK = 0,
  RA_STATUS_NULL_ARGUMENT = 1,
  RA_STATUS_INVALID_ARGUMENT = 2,
  RA_STATUS_IO = 3,
  RA_STATUS_FORMAT = 4,
  RA_STATUS_DEGENERATE = 5,
  RA_STATUS_NO_POLE = 6,
  RA_STATUS_TRACK = 7,
  RA_STATUS_MANIFEST_INVALID = 8,
  RA_STATUS_PANIC = 9,
} RaStatus;

typedef enum RaSide {
  RA_SIDE_LEFT = 0,
  RA_SIDE_RIGHT = 1,
} RaSide;

// Opaque per-pixel class-id mask.
typedef struct RaClassMask RaClassMask;

// Opaque 8-bit grayscale image.
typedef struct RaGrayImage RaGrayImage;

// Opaque set of normalized sign reference crops.
typedef struct RaReferenceLibrary RaReferenceLibrary;

// Opaque validated GPS track.
typedef struct RaTrack RaTrack;

typedef struct RaPoint {
  int64_t x;
  int64_t y;
} RaPoint;

typedef struct RaRotatedRect {
  double center_x;
  double center_y;
  double width;
  double height;
  // Degrees in [-90, 90), long side from the x-axis toward +y.
  double angle;
} RaRotatedRect;

typedef struct RaBarrier {
  enum RaSide side;
  double solidity;
  bool safe;
  double area;
  size_t x0;
  size_t y0;
  size_t x1;
  size_t y1;
} RaBarrier;

typedef struct RaMarkingParams {
  size_t threshold_window;
  int32_t threshold_offset;
  double density_threshold;
  // 0 derives the count from `superpixel_area`.
  size_t slic_k;
  double compactness;
  size_t iterations;
  double superpixel_area;
} RaMarkingParams;

typedef struct RaMarkingRegion {
  size_t area;
  double mean_density;
  size_t superpixels;
  size_t x0;
  size_t y0;
  size_t x1;
  size_t y1;
} RaMarkingRegion;

// Message of the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *ra_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ra_version(void);

// Release a string returned by this library.
//
// # Safety
// `s` must be null or a string obtained from this library, freed once.
void ra_string_free(char *s);

// Copy `width * height` row-major bytes into a new image.
//
// # Safety
// `data` must point to `len` bytes; `out` must be writable.
enum RaStatus ra_gray_image_new(size_t width,
                                size_t height,
                                const uint8_t *data,
                                size_t len,
                                struct RaGrayImage **out);

// Load a P5 or P6 file; colour is converted to luma.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RaStatus ra_gray_image_load(const char *path, struct RaGrayImage **out);

// # Safety
// `img` must be a live handle.
size_t ra_gray_image_width(const struct RaGrayImage *img);

// # Safety
// `img` must be a live handle.
size_t ra_gray_image_height(const struct RaGrayImage *img);

// # Safety
// `img` must be null or a handle from this library, freed once.
void ra_gray_image_free(struct RaGrayImage *img);

// # Safety
// `labels` must point to `len` bytes; `out` must be writable.
enum RaStatus ra_class_mask_new(size_t width,
                                size_t height,
                                const uint8_t *labels,
                                size_t len,
                                struct RaClassMask **out);

// Load a P5 class mask.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RaStatus ra_class_mask_load(const char *path, struct RaClassMask **out);

// # Safety
// `mask` must be null or a handle from this library, freed once.
void ra_class_mask_free(struct RaClassMask *mask);

// Convex hull vertices, counter-clockwise on screen.
//
// # Safety
// `pts` must hold `n` points; `out` must hold `capacity` points.
enum RaStatus ra_convex_hull(const struct RaPoint *pts,
                             size_t n,
                             struct RaPoint *out,
                             size_t capacity,
                             size_t *out_count);

// # Safety
// `pts` must hold `n` points; `out` must be writable.
enum RaStatus ra_min_area_rect(const struct RaPoint *pts, size_t n, struct RaRotatedRect *out);

// Classify every barrier contour. `out_dropped` (nullable) receives the
// number of contours skipped for a degenerate hull.
//
// # Safety
// `classes` must hold `n_classes` ids; `out` must hold `capacity` items.
enum RaStatus ra_assess_barriers(const struct RaClassMask *mask,
                                 size_t frame_width,
                                 const uint8_t *classes,
                                 size_t n_classes,
                                 double right_threshold,
                                 double left_threshold,
                                 double min_area,
                                 struct RaBarrier *out,
                                 size_t capacity,
                                 size_t *out_count,
                                 size_t *out_dropped);

// Pole lean in degrees from vertical, in [0, 90).
//
// # Safety
// `mask` must be a live handle; `out_deg` must be writable.
enum RaStatus ra_pole_skew(const struct RaClassMask *mask,
                           uint8_t pole_class,
                           double sign_x,
                           double sign_y,
                           double *out_deg);

// Fill `out` with the library defaults.
//
// # Safety
// `out` must be writable.
enum RaStatus ra_marking_params_default(struct RaMarkingParams *out);

// Damaged marking regions.
//
// # Safety
// Handles must be live; `classes` must hold `n_classes` ids; `params`
// must be readable; `out` must hold `capacity` items.
enum RaStatus ra_marking_damage(const struct RaGrayImage *gray,
                                const struct RaClassMask *mask,
                                const uint8_t *classes,
                                size_t n_classes,
                                const struct RaMarkingParams *params,
                                struct RaMarkingRegion *out,
                                size_t capacity,
                                size_t *out_count);

// Parse `t,lat,lon` CSV text.
//
// # Safety
// `csv` must be a NUL-terminated string; `out` must be writable.
enum RaStatus ra_track_parse(const char *csv, struct RaTrack **out);

// # Safety
// `track` must be a live handle; `lat` and `lon` must be writable.
enum RaStatus ra_track_interpolate(const struct RaTrack *track, double t, double *lat, double *lon);

// # Safety
// `track` must be null or a handle from this library, freed once.
void ra_track_free(struct RaTrack *track);

// Load `<dir>/<class_id>/<n>.pgm`.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum RaStatus ra_reference_library_load(const char *dir, struct RaReferenceLibrary **out);

// Number of reference crops across all classes.
//
// # Safety
// `lib` must be a live handle.
size_t ra_reference_library_len(const struct RaReferenceLibrary *lib);

// Best similarity of a crop against the references of `class_id`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum RaStatus ra_sign_similarity(const struct RaReferenceLibrary *lib,
                                 uint32_t class_id,
                                 const struct RaGrayImage *crop,
                                 double *out);

// # Safety
// `lib` must be null or a handle from this library, freed once.
void ra_reference_library_free(struct RaReferenceLibrary *lib);

// Run a scene manifest and write the GeoJSON report. `debug_dir` may be
// null; `jobs` 0 uses one worker per core. `out_summary_json` (nullable)
// receives the run summary; release it with [`ra_string_free`].
//
// # Safety
// Strings must be NUL-terminated; `out_summary_json` null or writable.
enum RaStatus ra_run_manifest(const char *manifest,
                              const char *output,
                              const char *debug_dir,
                              size_t jobs,
                              char **out_summary_json);

// Problems with a manifest as a JSON array of strings (empty when valid).
//
// # Safety
// `manifest` must be NUL-terminated; `out_json` must be writable.
enum RaStatus ra_validate_manifest(const char *manifest, char **out_json);

#endif  /* ROADAUDIT_H */
