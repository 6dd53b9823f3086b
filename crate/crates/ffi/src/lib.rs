//! C ABI for the depth thickness field toolkit.
//!
//! Conventions:
//!
//! * Handles (`DtfTensor`, `DtfCalibration`, `DtfConfig`) are opaque; free
//!   them with the matching `_free` function exactly once.
//! * Every fallible function returns a [`DtfStatus`]; on non-`Ok` the
//!   thread-local message from [`dtf_last_error_message`] describes the
//!   failure.
//! * Tensors are dense row-major f32 with u32 dims, matching the `DTF1`
//!   blob format. Label grids encode OCCUPIED/FREE/UNKNOWN as 1/0/-1.
//! * Panics are caught at the boundary and reported as `Internal`.

use dtf_core::binning;
use dtf_core::config::PipelineConfig;
use dtf_core::lifting;
use dtf_core::occupancy;
use dtf_core::repr;
use dtf_core::types::{
    BinSpec, CameraCalibration, DepthMap, FeaturePlane, FrustumGrid, GridSpec, VoxelGrid,
};
use dtf_core::{Error, Tensor};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Invalid argument or geometry (bad dims, scale, spec, ray).
    InvalidArgument = 2,
    /// Shapes of the inputs disagree.
    DimMismatch = 3,
    /// A value fell outside its documented range.
    OutOfRange = 4,
    /// NaN or infinity where finite values are required.
    NonFinite = 5,
    /// File system failure.
    Io = 6,
    /// Malformed KITTI or blob input.
    Parse = 7,
    /// Internal panic; file a bug.
    Internal = 8,
}

/// Interpolation scheme for `dtf_sample_to_voxels`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtfInterpMode {
    Trilinear = 0,
    Nearest = 1,
}

/// Depth range and bin count of the LID discretization.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DtfBinSpec {
    pub d_min: f64,
    pub d_max: f64,
    pub num_bins: u32,
}

/// Axis-aligned voxel volume: closed ranges in meters, isotropic voxel edge.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DtfGridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub voxel_size: f64,
}

/// Opaque dense row-major f32 tensor.
pub struct DtfTensor {
    inner: Tensor,
}

/// Opaque camera calibration (projection, rectification, LiDAR-to-camera).
pub struct DtfCalibration {
    inner: CameraCalibration,
}

/// Opaque pipeline configuration.
pub struct DtfConfig {
    inner: PipelineConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: String) {
    let sanitized = CString::new(msg.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_of(e: &Error) -> DtfStatus {
    match e {
        Error::DimMismatch { .. } => DtfStatus::DimMismatch,
        Error::NonFiniteInput { .. } => DtfStatus::NonFinite,
        Error::OutOfRange { .. } | Error::RangeError { .. } | Error::SliceOutOfRange { .. } => {
            DtfStatus::OutOfRange
        }
        Error::Io(_) | Error::Png(_) => DtfStatus::Io,
        Error::BadMagic { .. }
        | Error::TruncatedPayload { .. }
        | Error::MissingKey { .. }
        | Error::MalformedNumber { .. }
        | Error::WrongArity { .. }
        | Error::WrongFieldCount { .. }
        | Error::TruncatedRecord { .. }
        | Error::WrongBitDepth { .. }
        | Error::WrongChannelCount { .. } => DtfStatus::Parse,
        _ => DtfStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> DtfStatus {
    let code = status_of(&e);
    set_error(e.to_string());
    code
}

fn null_arg(name: &str) -> DtfStatus {
    set_error(format!("argument `{name}` is null"));
    DtfStatus::NullArgument
}

/// Run a fallible body, catching panics at the ABI boundary.
fn guarded(body: impl FnOnce() -> DtfStatus) -> DtfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            DtfStatus::Internal
        }
    }
}

fn bin_spec(b: DtfBinSpec) -> BinSpec {
    BinSpec {
        d_min: b.d_min,
        d_max: b.d_max,
        num_bins: b.num_bins as usize,
    }
}

fn grid_spec(g: DtfGridSpec) -> GridSpec {
    GridSpec {
        x_range: [g.x_min, g.x_max],
        y_range: [g.y_min, g.y_max],
        z_range: [g.z_min, g.z_max],
        voxel_size: g.voxel_size,
    }
}

fn emit(out: *mut *mut DtfTensor, tensor: Tensor) -> DtfStatus {
    unsafe {
        *out = Box::into_raw(Box::new(DtfTensor { inner: tensor }));
    }
    DtfStatus::Ok
}

unsafe fn tensor_ref<'a>(t: *const DtfTensor) -> Option<&'a Tensor> {
    t.as_ref().map(|t| &t.inner)
}

unsafe fn str_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, DtfStatus> {
    if s.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("argument `{name}` is not valid UTF-8"));
        DtfStatus::InvalidArgument
    })
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dtf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// Tensor handles
// ---------------------------------------------------------------------------

/// Create a tensor from dims and row-major data.
///
/// # Safety
/// `dims` must point to `rank` u32 values, `data` to `len` f32 values, and
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_create(
    dims: *const u32,
    rank: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        if rank > 0 && dims.is_null() {
            return null_arg("dims");
        }
        if len > 0 && data.is_null() {
            return null_arg("data");
        }
        let dims = std::slice::from_raw_parts(dims, rank).to_vec();
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        match Tensor::new(dims, data) {
            Ok(t) => emit(out, t),
            Err(e) => fail(e),
        }
    })
}

/// Read a `DTF1` blob from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_read(
    path: *const c_char,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        match Tensor::read_file(path) {
            Ok(t) => emit(out, t),
            Err(e) => fail(e),
        }
    })
}

/// Write a tensor as a `DTF1` blob.
///
/// # Safety
/// `t` must be a live tensor handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_write(t: *const DtfTensor, path: *const c_char) -> DtfStatus {
    guarded(|| {
        let Some(tensor) = tensor_ref(t) else {
            return null_arg("t");
        };
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        match tensor.write_file(path) {
            Ok(()) => DtfStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Number of dims; 0 for a scalar or a null handle.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_rank(t: *const DtfTensor) -> usize {
    tensor_ref(t).map_or(0, |t| t.rank())
}

/// Copy up to `cap` dims into `out_dims`.
///
/// # Safety
/// `out_dims` must point to at least `cap` u32 slots.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_dims(
    t: *const DtfTensor,
    out_dims: *mut u32,
    cap: usize,
) -> DtfStatus {
    guarded(|| {
        let Some(tensor) = tensor_ref(t) else {
            return null_arg("t");
        };
        if out_dims.is_null() {
            return null_arg("out_dims");
        }
        if cap < tensor.rank() {
            set_error(format!(
                "dims buffer holds {cap}, tensor has rank {}",
                tensor.rank()
            ));
            return DtfStatus::InvalidArgument;
        }
        for (i, &d) in tensor.dims().iter().enumerate() {
            *out_dims.add(i) = d;
        }
        DtfStatus::Ok
    })
}

/// Borrow the row-major payload; valid while the handle lives.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_data(t: *const DtfTensor) -> *const f32 {
    tensor_ref(t).map_or(ptr::null(), |t| t.data().as_ptr())
}

/// Element count of the payload.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_len(t: *const DtfTensor) -> usize {
    tensor_ref(t).map_or(0, |t| t.element_count())
}

/// Release a tensor handle (null is a no-op).
///
/// # Safety
/// `t` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dtf_tensor_free(t: *mut DtfTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

// ---------------------------------------------------------------------------
// Calibration and config handles
// ---------------------------------------------------------------------------

/// Parse KITTI calibration text (P2, R0_rect, Tr_velo_to_cam).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_calibration_parse(
    text: *const c_char,
    out: *mut *mut DtfCalibration,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(code) => return code,
        };
        match dtf_core::kitti::parse_calib(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(DtfCalibration { inner: c }));
                DtfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Camera optical center in the world frame (the occupancy ray origin).
///
/// # Safety
/// `calib` must be a live handle; `out_xyz` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dtf_camera_center(
    calib: *const DtfCalibration,
    out_xyz: *mut f64,
) -> DtfStatus {
    guarded(|| {
        let Some(c) = calib.as_ref() else {
            return null_arg("calib");
        };
        if out_xyz.is_null() {
            return null_arg("out_xyz");
        }
        match c.inner.camera_center_world() {
            Ok(p) => {
                *out_xyz.add(0) = p.x;
                *out_xyz.add(1) = p.y;
                *out_xyz.add(2) = p.z;
                DtfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a calibration handle (null is a no-op).
///
/// # Safety
/// `calib` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dtf_calibration_free(calib: *mut DtfCalibration) {
    if !calib.is_null() {
        drop(Box::from_raw(calib));
    }
}

/// Parse a key=value pipeline config (empty text gives the defaults).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_config_parse(
    text: *const c_char,
    out: *mut *mut DtfConfig,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(code) => return code,
        };
        match PipelineConfig::parse(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(DtfConfig { inner: cfg }));
                DtfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Bin spec held by a config.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_config_bin_spec(
    cfg: *const DtfConfig,
    out: *mut DtfBinSpec,
) -> DtfStatus {
    guarded(|| {
        let Some(c) = cfg.as_ref() else {
            return null_arg("cfg");
        };
        if out.is_null() {
            return null_arg("out");
        }
        *out = DtfBinSpec {
            d_min: c.inner.bin_spec.d_min,
            d_max: c.inner.bin_spec.d_max,
            num_bins: c.inner.bin_spec.num_bins as u32,
        };
        DtfStatus::Ok
    })
}

/// Grid spec held by a config.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_config_grid_spec(
    cfg: *const DtfConfig,
    out: *mut DtfGridSpec,
) -> DtfStatus {
    guarded(|| {
        let Some(c) = cfg.as_ref() else {
            return null_arg("cfg");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let g = &c.inner.grid_spec;
        *out = DtfGridSpec {
            x_min: g.x_range[0],
            x_max: g.x_range[1],
            y_min: g.y_range[0],
            y_max: g.y_range[1],
            z_min: g.z_range[0],
            z_max: g.z_range[1],
            voxel_size: g.voxel_size,
        };
        DtfStatus::Ok
    })
}

/// Release a config handle (null is a no-op).
///
/// # Safety
/// `cfg` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dtf_config_free(cfg: *mut DtfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

// ---------------------------------------------------------------------------
// Grid and LID scalar operations
// ---------------------------------------------------------------------------

/// Voxel counts per axis.
///
/// # Safety
/// `out_dims` must point to 3 u32 slots.
#[no_mangle]
pub unsafe extern "C" fn dtf_grid_dims(grid: DtfGridSpec, out_dims: *mut u32) -> DtfStatus {
    guarded(|| {
        if out_dims.is_null() {
            return null_arg("out_dims");
        }
        match grid_spec(grid).dims() {
            Ok(d) => {
                for (i, v) in d.iter().enumerate() {
                    *out_dims.add(i) = *v as u32;
                }
                DtfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Continuous LID bin coordinate of a metric depth (clamped, with flag).
///
/// # Safety
/// `out` and `out_clamped` must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn dtf_lid_continuous(
    z: f64,
    bins: DtfBinSpec,
    out: *mut f64,
    out_clamped: *mut bool,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() || out_clamped.is_null() {
            return null_arg("out");
        }
        let c = binning::lid_continuous(z, &bin_spec(bins));
        *out = c.value;
        *out_clamped = c.out_of_range;
        DtfStatus::Ok
    })
}

/// LID bin index of a metric depth (clamped, with flag).
///
/// # Safety
/// `out` and `out_clamped` must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn dtf_lid_index(
    z: f64,
    bins: DtfBinSpec,
    out: *mut u32,
    out_clamped: *mut bool,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() || out_clamped.is_null() {
            return null_arg("out");
        }
        let c = binning::lid_index(z, &bin_spec(bins));
        *out = c.value as u32;
        *out_clamped = c.out_of_range;
        DtfStatus::Ok
    })
}

/// Metric depth of a continuous bin coordinate in [0, D].
///
/// # Safety
/// `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_lid_depth_of(
    z_prime: f64,
    bins: DtfBinSpec,
    out: *mut f64,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match binning::lid_depth_of(z_prime, &bin_spec(bins)) {
            Ok(z) => {
                *out = z;
                DtfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// ---------------------------------------------------------------------------
// Depth representations and loss
// ---------------------------------------------------------------------------

/// One-hot encode a rank-2 (W, H) depth tensor over the LID bins; sentinel
/// (0) pixels yield all-zero rows. Output is (W, H, D).
///
/// # Safety
/// `depth_wh` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_encode_one_hot(
    depth_wh: *const DtfTensor,
    bins: DtfBinSpec,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let Some(t) = tensor_ref(depth_wh) else {
            return null_arg("depth_wh");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let result =
            DepthMap::from_tensor(t).and_then(|map| repr::encode_one_hot(&map, &bin_spec(bins)));
        match result {
            Ok(oh) => emit(out, oh.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Extension mask of a one-hot volume: 0 on the band of up to `radius` bins
/// each side of the true bin, all-zero rows for invalid pixels.
///
/// # Safety
/// `one_hot` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_extension_mask(
    one_hot: *const DtfTensor,
    radius: u32,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let Some(t) = tensor_ref(one_hot) else {
            return null_arg("one_hot");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let result = repr::DepthVolume::from_tensor(t)
            .and_then(repr::OneHotVolume::from_volume)
            .map(|oh| repr::extension_mask(&oh, radius as usize));
        match result {
            Ok(mask) => emit(out, mask.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Element-wise product of an encoding and a 0/1 mask.
///
/// # Safety
/// `psi` and `mask` must be live handles and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_soft_extended_target(
    psi: *const DtfTensor,
    mask: *const DtfTensor,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let (Some(p), Some(m)) = (tensor_ref(psi), tensor_ref(mask)) else {
            return null_arg("psi/mask");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let result = (|| {
            let psi = repr::DepthVolume::from_tensor(p)?;
            let mask = repr::ExtensionMask::from_volume(repr::DepthVolume::from_tensor(m)?, 0)?;
            repr::soft_extended_target(&psi, &mask)
        })();
        match result {
            Ok(target) => emit(out, target.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Masked binary focal loss averaged over W*H pixels, with its exact
/// gradient written to `out_grad`.
///
/// # Safety
/// All tensor arguments must be live handles; `out_loss` and `out_grad`
/// must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn dtf_thickness_focal_loss(
    pred: *const DtfTensor,
    target: *const DtfTensor,
    mask: *const DtfTensor,
    alpha: f64,
    gamma: f64,
    out_loss: *mut f64,
    out_grad: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let (Some(p), Some(t), Some(m)) = (tensor_ref(pred), tensor_ref(target), tensor_ref(mask))
        else {
            return null_arg("pred/target/mask");
        };
        if out_loss.is_null() || out_grad.is_null() {
            return null_arg("out_loss/out_grad");
        }
        let result = (|| {
            let pred = repr::ThicknessField::from_volume(repr::DepthVolume::from_tensor(p)?)?;
            let target = repr::DepthVolume::from_tensor(t)?;
            let mask = repr::ExtensionMask::from_volume(repr::DepthVolume::from_tensor(m)?, 0)?;
            repr::thickness_focal_loss(&pred, &target, &mask, &repr::FocalParams { alpha, gamma })
        })();
        match result {
            Ok(fl) => {
                *out_loss = fl.loss;
                emit(out_grad, fl.grad.to_tensor())
            }
            Err(e) => fail(e),
        }
    })
}

/// Unweighted sum of the three loss terms.
///
/// # Safety
/// `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_compose_total_loss(
    l_org: f64,
    l_occ: f64,
    l_thickness: f64,
    out: *mut f64,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match repr::compose_total_loss(l_org, l_occ, l_thickness) {
            Ok(total) => {
                *out = total;
                DtfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

// ---------------------------------------------------------------------------
// Frustum / voxel geometry
// ---------------------------------------------------------------------------

/// Outer-product lift of (W, H, C) features by (W, H, D) per-pixel weights
/// into a (W, H, D, C) frustum.
///
/// # Safety
/// `weights` and `features` must be live handles, `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_lift_features(
    weights: *const DtfTensor,
    features: *const DtfTensor,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let (Some(w), Some(f)) = (tensor_ref(weights), tensor_ref(features)) else {
            return null_arg("weights/features");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let result = (|| {
            let weights = repr::DepthVolume::from_tensor(w)?;
            let features = FeaturePlane::from_tensor(f)?;
            lifting::lift_features(&weights, &features)
        })();
        match result {
            Ok(g) => emit(out, g.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Voxelize a (W, H, D, C) frustum into an (X, Y, Z, C) grid through the
/// camera model. Deterministic for any `threads` value.
///
/// # Safety
/// `frustum` and `calib` must be live handles, `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_sample_to_voxels(
    frustum: *const DtfTensor,
    calib: *const DtfCalibration,
    grid: DtfGridSpec,
    bins: DtfBinSpec,
    feature_stride: u32,
    interp: DtfInterpMode,
    threads: u32,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let Some(f) = tensor_ref(frustum) else {
            return null_arg("frustum");
        };
        let Some(c) = calib.as_ref() else {
            return null_arg("calib");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let opts = lifting::SamplingOptions {
            interp: match interp {
                DtfInterpMode::Trilinear => lifting::InterpMode::Trilinear,
                DtfInterpMode::Nearest => lifting::InterpMode::Nearest,
            },
            threads: threads.max(1) as usize,
        };
        let result = FrustumGrid::from_tensor(f).and_then(|frustum| {
            lifting::sample_to_voxels(
                &frustum,
                &c.inner,
                &grid_spec(grid),
                &bin_spec(bins),
                feature_stride as usize,
                &opts,
            )
        });
        match result {
            Ok(v) => emit(out, v.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Element-wise occupancy gate: voxels (X, Y, Z, C) scaled by a [0, 1]
/// occupancy field (X, Y, Z).
///
/// # Safety
/// `voxels` and `occupancy` must be live handles, `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_occupancy_gate(
    voxels: *const DtfTensor,
    occupancy: *const DtfTensor,
    grid: DtfGridSpec,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let (Some(v), Some(o)) = (tensor_ref(voxels), tensor_ref(occupancy)) else {
            return null_arg("voxels/occupancy");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let result = (|| {
            let voxels = VoxelGrid::from_tensor(v, grid_spec(grid))?;
            let occ = lifting::OccupancyField::from_tensor(o)?;
            lifting::occupancy_gate(&voxels, &occ)
        })();
        match result {
            Ok(g) => emit(out, g.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Stack the Z axis of an (X, Y, Z, C) grid into channels: (X, Y, Z*C).
///
/// # Safety
/// `voxels` must be a live handle, `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_collapse_to_bev(
    voxels: *const DtfTensor,
    grid: DtfGridSpec,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let Some(v) = tensor_ref(voxels) else {
            return null_arg("voxels");
        };
        if out.is_null() {
            return null_arg("out");
        }
        match VoxelGrid::from_tensor(v, grid_spec(grid)) {
            Ok(vg) => emit(out, lifting::collapse_to_bev(&vg).to_tensor()),
            Err(e) => fail(e),
        }
    })
}

// ---------------------------------------------------------------------------
// Occupancy labels
// ---------------------------------------------------------------------------

/// Tri-state labels (1/0/-1 for OCCUPIED/FREE/UNKNOWN) from a point cloud
/// of `n_points` world xyz triplets and the sensor origin.
///
/// # Safety
/// `points_xyz` must point to `3 * n_points` doubles, `origin_xyz` to 3
/// doubles, and `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_point_cloud_labels(
    points_xyz: *const f64,
    n_points: usize,
    origin_xyz: *const f64,
    grid: DtfGridSpec,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        if n_points > 0 && points_xyz.is_null() {
            return null_arg("points_xyz");
        }
        if origin_xyz.is_null() {
            return null_arg("origin_xyz");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let points: Vec<[f64; 3]> = if n_points == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(points_xyz, n_points * 3)
                .chunks_exact(3)
                .map(|p| [p[0], p[1], p[2]])
                .collect()
        };
        let origin = [*origin_xyz.add(0), *origin_xyz.add(1), *origin_xyz.add(2)];
        match occupancy::point_cloud_labels(
            &occupancy::PointCloud::new(points),
            origin,
            &grid_spec(grid),
        ) {
            Ok(labels) => emit(out, labels.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Tri-state labels from `n_boxes` oriented boxes given as 7 doubles each
/// (center xyz, height, width, length, yaw), shrunk by `scale` about their
/// centers. Box labels assert OCCUPIED only.
///
/// # Safety
/// `boxes7` must point to `7 * n_boxes` doubles and `out` must be a valid
/// destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_box_labels(
    boxes7: *const f64,
    n_boxes: usize,
    scale: f64,
    grid: DtfGridSpec,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        if n_boxes > 0 && boxes7.is_null() {
            return null_arg("boxes7");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let raw: &[f64] = if n_boxes == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(boxes7, n_boxes * 7)
        };
        let result = (|| {
            let boxes = raw
                .chunks_exact(7)
                .map(|b| {
                    occupancy::OrientedBox3D::new([b[0], b[1], b[2]], b[3], b[4], b[5], b[6])
                })
                .collect::<dtf_core::Result<Vec<_>>>()?;
            occupancy::box_labels(&boxes, scale, &grid_spec(grid))
        })();
        match result {
            Ok(labels) => emit(out, labels.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

/// Per-voxel lattice join (OCCUPIED > FREE > UNKNOWN) of two label grids
/// built over the same spec.
///
/// # Safety
/// `a` and `b` must be live handles, `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_union_labels(
    a: *const DtfTensor,
    b: *const DtfTensor,
    grid: DtfGridSpec,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let (Some(ta), Some(tb)) = (tensor_ref(a), tensor_ref(b)) else {
            return null_arg("a/b");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let spec = grid_spec(grid);
        let result = (|| {
            let ga = occupancy::OccupancyLabelGrid::from_tensor(ta, spec)?;
            let gb = occupancy::OccupancyLabelGrid::from_tensor(tb, spec)?;
            occupancy::union_labels(&ga, &gb)
        })();
        match result {
            Ok(u) => emit(out, u.to_tensor()),
            Err(e) => fail(e),
        }
    })
}

// ---------------------------------------------------------------------------
// KITTI ingestion
// ---------------------------------------------------------------------------

/// Read a velodyne scan file into an (N, 3) tensor of world xyz
/// (reflectance dropped).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_velodyne_read(
    path: *const c_char,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        let result = (|| {
            let bytes = std::fs::read(path)?;
            let cloud = dtf_core::kitti::read_velodyne(&bytes)?;
            let data: Vec<f32> = cloud
                .points()
                .iter()
                .flat_map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
                .collect();
            Tensor::new(vec![cloud.len() as u32, 3], data)
        })();
        match result {
            Ok(t) => emit(out, t),
            Err(e) => fail(e),
        }
    })
}

/// Read a KITTI label file and convert its non-DontCare records into
/// world-frame boxes as an (N, 7) tensor (center xyz, h, w, l, yaw).
///
/// # Safety
/// `path` must be a NUL-terminated string, `calib` a live handle, and
/// `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn dtf_world_boxes_read(
    path: *const c_char,
    calib: *const DtfCalibration,
    out: *mut *mut DtfTensor,
) -> DtfStatus {
    guarded(|| {
        let Some(c) = calib.as_ref() else {
            return null_arg("calib");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        let result = (|| {
            let text = std::fs::read_to_string(path)?;
            let records = dtf_core::kitti::parse_labels(&text)?;
            let mut data = Vec::new();
            let mut count = 0u32;
            for rec in records.iter().filter(|r| !r.is_dont_care()) {
                let b = dtf_core::kitti::label_to_world_box(rec, &c.inner)?;
                data.extend_from_slice(&[
                    b.center[0] as f32,
                    b.center[1] as f32,
                    b.center[2] as f32,
                    b.height as f32,
                    b.width as f32,
                    b.length as f32,
                    b.yaw as f32,
                ]);
                count += 1;
            }
            Tensor::new(vec![count, 7], data)
        })();
        match result {
            Ok(t) => emit(out, t),
            Err(e) => fail(e),
        }
    })
}
