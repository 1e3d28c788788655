#ifndef CROSSTRACK_H
#define CROSSTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CT_CASE_A 1

#define CT_CASE_B (1 << 1)

#define CT_CASE_C (1 << 2)

#define CT_CASE_D (1 << 3)

#define CT_CASE_E (1 << 4)

#define CT_CASES_ALL 31

typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_INVALID_ARGUMENT = 2,
  CT_STATUS_INVALID_CALIBRATION = 3,
  CT_STATUS_INVALID_CONFIG = 4,
  CT_STATUS_BUFFER_TOO_SMALL = 5,
  CT_STATUS_INTERNAL = 6,
} CtStatus;

/**
 * Opaque tracker handle.
 */
typedef struct CtTracker CtTracker;

typedef struct CtConfig {
  double theta_s;
  double theta_g_2d;
  double theta_g_3d;
  double theta_iou;
  uint32_t theta_hits;
  uint32_t max_age_n;
  double boundary_margin;
  double sentinel;
  uint32_t min_output_hits;
} CtConfig;

typedef struct CtBox2D {
  double left;
  double top;
  double right;
  double bottom;
} CtBox2D;

typedef struct CtCameraDetection {
  struct CtBox2D bbox;
  double score;
} CtCameraDetection;

/**
 * Centroid in camera coordinates, extents in meters, yaw about the y axis.
 */
typedef struct CtBox3D {
  double x;
  double y;
  double z;
  double l;
  double w;
  double h;
  double yaw;
} CtBox3D;

typedef struct CtLidarDetection {
  struct CtBox3D bbox;
  double score;
} CtLidarDetection;

typedef struct CtOutputEntry {
  uint64_t track_id;
  struct CtBox2D box2d;
  struct CtBox3D box3d;
  double score;
} CtOutputEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

struct CtConfig ct_default_config(void);

double ct_iou_2d(struct CtBox2D a, struct CtBox2D b);

/**
 * Creates a tracker.
 *
 * `projection` is the row-major 3x4 camera matrix. `cases` is a bit set of
 * `CT_CASE_*`; with `lidar_only` set the camera stream is ignored and every
 * confirmed LiDAR trajectory is reported. A null `config` means defaults.
 *
 * # Safety
 * `projection` must point to 12 doubles, `config` must be null or valid, and
 * `out` must be writable.
 */
enum CtStatus ct_tracker_new(const double *projection,
                             double image_width,
                             double image_height,
                             const struct CtConfig *config,
                             uint32_t cases,
                             bool lidar_only,
                             struct CtTracker **out);

/**
 * Processes the next frame. `n_out` receives the number of reported tracks,
 * which [`ct_tracker_output`] then copies out.
 *
 * # Safety
 * `tracker` must come from [`ct_tracker_new`]; each array must hold its
 * stated number of elements (or be null with length 0); `n_out` may be null.
 */
enum CtStatus ct_tracker_step(struct CtTracker *tracker,
                              const struct CtCameraDetection *camera,
                              size_t n_camera,
                              const struct CtLidarDetection *lidar,
                              size_t n_lidar,
                              size_t *n_out);

/**
 * Copies the last frame's reported tracks into `buf`. Fails with
 * `BufferTooSmall` (and sets `written` to the needed count) when `cap` is short.
 *
 * # Safety
 * `tracker` must be live, `buf` must have room for `cap` entries (or be null
 * with `cap` 0), and `written` must be writable.
 */
enum CtStatus ct_tracker_output(const struct CtTracker *tracker,
                                struct CtOutputEntry *buf,
                                size_t cap,
                                size_t *written);

/**
 * Releases a tracker; null is a no-op.
 *
 * # Safety
 * `tracker` must be null or come from [`ct_tracker_new`], and not be used again.
 */
void ct_tracker_free(struct CtTracker *tracker);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `cap`; returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must have room for `cap` bytes, or be null with `cap` 0.
 */
size_t ct_last_error(char *buf, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSSTRACK_H */
