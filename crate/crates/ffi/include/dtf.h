#ifndef DTF_H
#define DTF_H

/* This file is generated by cbindgen from dtf-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Interpolation scheme for `dtf_sample_to_voxels`.
 */
typedef enum DtfInterpMode {
  DTF_INTERP_MODE_TRILINEAR = 0,
  DTF_INTERP_MODE_NEAREST = 1,
} DtfInterpMode;

/**
 * Result code of every fallible call.
 */
typedef enum DtfStatus {
  DTF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DTF_STATUS_NULL_ARGUMENT = 1,
  /**
   * Invalid argument or geometry (bad dims, scale, spec, ray).
   */
  DTF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Shapes of the inputs disagree.
   */
  DTF_STATUS_DIM_MISMATCH = 3,
  /**
   * A value fell outside its documented range.
   */
  DTF_STATUS_OUT_OF_RANGE = 4,
  /**
   * NaN or infinity where finite values are required.
   */
  DTF_STATUS_NON_FINITE = 5,
  /**
   * File system failure.
   */
  DTF_STATUS_IO = 6,
  /**
   * Malformed KITTI or blob input.
   */
  DTF_STATUS_PARSE = 7,
  /**
   * Internal panic; file a bug.
   */
  DTF_STATUS_INTERNAL = 8,
} DtfStatus;

/**
 * Opaque camera calibration (projection, rectification, LiDAR-to-camera).
 */
typedef struct DtfCalibration DtfCalibration;

/**
 * Opaque pipeline configuration.
 */
typedef struct DtfConfig DtfConfig;

/**
 * Opaque dense row-major f32 tensor.
 */
typedef struct DtfTensor DtfTensor;

/**
 * Depth range and bin count of the LID discretization.
 */
typedef struct DtfBinSpec {
  double d_min;
  double d_max;
  uint32_t num_bins;
} DtfBinSpec;

/**
 * Axis-aligned voxel volume: closed ranges in meters, isotropic voxel edge.
 */
typedef struct DtfGridSpec {
  double x_min;
  double x_max;
  double y_min;
  double y_max;
  double z_min;
  double z_max;
  double voxel_size;
} DtfGridSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dtf_last_error_message(void);

/**
 * Create a tensor from dims and row-major data.
 *
 * # Safety
 * `dims` must point to `rank` u32 values, `data` to `len` f32 values, and
 * `out` must be a valid destination pointer.
 */
enum DtfStatus dtf_tensor_create(const uint32_t *dims,
                                 size_t rank,
                                 const float *data,
                                 size_t len,
                                 struct DtfTensor **out);

/**
 * Read a `DTF1` blob from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid destination.
 */
enum DtfStatus dtf_tensor_read(const char *path, struct DtfTensor **out);

/**
 * Write a tensor as a `DTF1` blob.
 *
 * # Safety
 * `t` must be a live tensor handle and `path` a NUL-terminated string.
 */
enum DtfStatus dtf_tensor_write(const struct DtfTensor *t, const char *path);

/**
 * Number of dims; 0 for a scalar or a null handle.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
size_t dtf_tensor_rank(const struct DtfTensor *t);

/**
 * Copy up to `cap` dims into `out_dims`.
 *
 * # Safety
 * `out_dims` must point to at least `cap` u32 slots.
 */
enum DtfStatus dtf_tensor_dims(const struct DtfTensor *t, uint32_t *out_dims, size_t cap);

/**
 * Borrow the row-major payload; valid while the handle lives.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
const float *dtf_tensor_data(const struct DtfTensor *t);

/**
 * Element count of the payload.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
size_t dtf_tensor_len(const struct DtfTensor *t);

/**
 * Release a tensor handle (null is a no-op).
 *
 * # Safety
 * `t` must be null or a handle returned by this library, freed once.
 */
void dtf_tensor_free(struct DtfTensor *t);

/**
 * Parse KITTI calibration text (P2, R0_rect, Tr_velo_to_cam).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid destination.
 */
enum DtfStatus dtf_calibration_parse(const char *text, struct DtfCalibration **out);

/**
 * Camera optical center in the world frame (the occupancy ray origin).
 *
 * # Safety
 * `calib` must be a live handle; `out_xyz` must point to 3 doubles.
 */
enum DtfStatus dtf_camera_center(const struct DtfCalibration *calib, double *out_xyz);

/**
 * Release a calibration handle (null is a no-op).
 *
 * # Safety
 * `calib` must be null or a handle returned by this library, freed once.
 */
void dtf_calibration_free(struct DtfCalibration *calib);

/**
 * Parse a key=value pipeline config (empty text gives the defaults).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid destination.
 */
enum DtfStatus dtf_config_parse(const char *text, struct DtfConfig **out);

/**
 * Bin spec held by a config.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid destination.
 */
enum DtfStatus dtf_config_bin_spec(const struct DtfConfig *cfg, struct DtfBinSpec *out);

/**
 * Grid spec held by a config.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid destination.
 */
enum DtfStatus dtf_config_grid_spec(const struct DtfConfig *cfg, struct DtfGridSpec *out);

/**
 * Release a config handle (null is a no-op).
 *
 * # Safety
 * `cfg` must be null or a handle returned by this library, freed once.
 */
void dtf_config_free(struct DtfConfig *cfg);

/**
 * Voxel counts per axis.
 *
 * # Safety
 * `out_dims` must point to 3 u32 slots.
 */
enum DtfStatus dtf_grid_dims(struct DtfGridSpec grid, uint32_t *out_dims);

/**
 * Continuous LID bin coordinate of a metric depth (clamped, with flag).
 *
 * # Safety
 * `out` and `out_clamped` must be valid destinations.
 */
enum DtfStatus dtf_lid_continuous(double z, struct DtfBinSpec bins, double *out, bool *out_clamped);

/**
 * LID bin index of a metric depth (clamped, with flag).
 *
 * # Safety
 * `out` and `out_clamped` must be valid destinations.
 */
enum DtfStatus dtf_lid_index(double z, struct DtfBinSpec bins, uint32_t *out, bool *out_clamped);

/**
 * Metric depth of a continuous bin coordinate in [0, D].
 *
 * # Safety
 * `out` must be a valid destination.
 */
enum DtfStatus dtf_lid_depth_of(double z_prime, struct DtfBinSpec bins, double *out);

/**
 * One-hot encode a rank-2 (W, H) depth tensor over the LID bins; sentinel
 * (0) pixels yield all-zero rows. Output is (W, H, D).
 *
 * # Safety
 * `depth_wh` must be a live handle and `out` a valid destination.
 */
enum DtfStatus dtf_encode_one_hot(const struct DtfTensor *depth_wh,
                                  struct DtfBinSpec bins,
                                  struct DtfTensor **out);

/**
 * Extension mask of a one-hot volume: 0 on the band of up to `radius` bins
 * each side of the true bin, all-zero rows for invalid pixels.
 *
 * # Safety
 * `one_hot` must be a live handle and `out` a valid destination.
 */
enum DtfStatus dtf_extension_mask(const struct DtfTensor *one_hot,
                                  uint32_t radius,
                                  struct DtfTensor **out);

/**
 * Element-wise product of an encoding and a 0/1 mask.
 *
 * # Safety
 * `psi` and `mask` must be live handles and `out` a valid destination.
 */
enum DtfStatus dtf_soft_extended_target(const struct DtfTensor *psi,
                                        const struct DtfTensor *mask,
                                        struct DtfTensor **out);

/**
 * Masked binary focal loss averaged over W*H pixels, with its exact
 * gradient written to `out_grad`.
 *
 * # Safety
 * All tensor arguments must be live handles; `out_loss` and `out_grad`
 * must be valid destinations.
 */
enum DtfStatus dtf_thickness_focal_loss(const struct DtfTensor *pred,
                                        const struct DtfTensor *target,
                                        const struct DtfTensor *mask,
                                        double alpha,
                                        double gamma,
                                        double *out_loss,
                                        struct DtfTensor **out_grad);

/**
 * Unweighted sum of the three loss terms.
 *
 * # Safety
 * `out` must be a valid destination.
 */
enum DtfStatus dtf_compose_total_loss(double l_org, double l_occ, double l_thickness, double *out);

/**
 * Outer-product lift of (W, H, C) features by (W, H, D) per-pixel weights
 * into a (W, H, D, C) frustum.
 *
 * # Safety
 * `weights` and `features` must be live handles, `out` a valid destination.
 */
enum DtfStatus dtf_lift_features(const struct DtfTensor *weights,
                                 const struct DtfTensor *features,
                                 struct DtfTensor **out);

/**
 * Voxelize a (W, H, D, C) frustum into an (X, Y, Z, C) grid through the
 * camera model. Deterministic for any `threads` value.
 *
 * # Safety
 * `frustum` and `calib` must be live handles, `out` a valid destination.
 */
enum DtfStatus dtf_sample_to_voxels(const struct DtfTensor *frustum,
                                    const struct DtfCalibration *calib,
                                    struct DtfGridSpec grid,
                                    struct DtfBinSpec bins,
                                    uint32_t feature_stride,
                                    enum DtfInterpMode interp,
                                    uint32_t threads,
                                    struct DtfTensor **out);

/**
 * Element-wise occupancy gate: voxels (X, Y, Z, C) scaled by a [0, 1]
 * occupancy field (X, Y, Z).
 *
 * # Safety
 * `voxels` and `occupancy` must be live handles, `out` a valid destination.
 */
enum DtfStatus dtf_occupancy_gate(const struct DtfTensor *voxels,
                                  const struct DtfTensor *occupancy,
                                  struct DtfGridSpec grid,
                                  struct DtfTensor **out);

/**
 * Stack the Z axis of an (X, Y, Z, C) grid into channels: (X, Y, Z*C).
 *
 * # Safety
 * `voxels` must be a live handle, `out` a valid destination.
 */
enum DtfStatus dtf_collapse_to_bev(const struct DtfTensor *voxels,
                                   struct DtfGridSpec grid,
                                   struct DtfTensor **out);

/**
 * Tri-state labels (1/0/-1 for OCCUPIED/FREE/UNKNOWN) from a point cloud
 * of `n_points` world xyz triplets and the sensor origin.
 *
 * # Safety
 * `points_xyz` must point to `3 * n_points` doubles, `origin_xyz` to 3
 * doubles, and `out` must be a valid destination.
 */
enum DtfStatus dtf_point_cloud_labels(const double *points_xyz,
                                      size_t n_points,
                                      const double *origin_xyz,
                                      struct DtfGridSpec grid,
                                      struct DtfTensor **out);

/**
 * Tri-state labels from `n_boxes` oriented boxes given as 7 doubles each
 * (center xyz, height, width, length, yaw), shrunk by `scale` about their
 * centers. Box labels assert OCCUPIED only.
 *
 * # Safety
 * `boxes7` must point to `7 * n_boxes` doubles and `out` must be a valid
 * destination.
 */
enum DtfStatus dtf_box_labels(const double *boxes7,
                              size_t n_boxes,
                              double scale,
                              struct DtfGridSpec grid,
                              struct DtfTensor **out);

/**
 * Per-voxel lattice join (OCCUPIED > FREE > UNKNOWN) of two label grids
 * built over the same spec.
 *
 * # Safety
 * `a` and `b` must be live handles, `out` a valid destination.
 */
enum DtfStatus dtf_union_labels(const struct DtfTensor *a,
                                const struct DtfTensor *b,
                                struct DtfGridSpec grid,
                                struct DtfTensor **out);

/**
 * Read a velodyne scan file into an (N, 3) tensor of world xyz
 * (reflectance dropped).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid destination.
 */
enum DtfStatus dtf_velodyne_read(const char *path, struct DtfTensor **out);

/**
 * Read a KITTI label file and convert its non-DontCare records into
 * world-frame boxes as an (N, 7) tensor (center xyz, h, w, l, yaw).
 *
 * # Safety
 * `path` must be a NUL-terminated string, `calib` a live handle, and
 * `out` a valid destination.
 */
enum DtfStatus dtf_world_boxes_read(const char *path,
                                    const struct DtfCalibration *calib,
                                    struct DtfTensor **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DTF_H */
