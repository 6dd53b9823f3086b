//! Frustum/voxel tensor geometry: outer-product lifting of image features by
//! per-pixel depth weights, frustum-to-voxel grid sampling through the
//! camera model, occupancy gating, and lossless BEV channel stacking.

use crate::binning::lid_continuous;
use crate::error::{Error, Result};
use crate::repr::DepthVolume;
use crate::tensor::Tensor;
use crate::types::{BinSpec, CameraCalibration, FeaturePlane, FrustumGrid, GridSpec, VoxelGrid};
use nalgebra::{Matrix3x4, Matrix4, Vector4};

/// Voxel occupancy weights in [0, 1], one scalar per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyField {
    dims: [usize; 3],
    data: Vec<f32>,
}

impl OccupancyField {
    pub fn new(dims: [usize; 3], data: Vec<f32>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::dim_mismatch(format!(
                "occupancy field {dims:?} requires {n} values, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::RangeError {
                context: format!("occupancy value {bad} outside [0, 1]"),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims() {
            [x, y, z] => Self::new([*x as usize, *y as usize, *z as usize], t.data().to_vec()),
            other => Err(Error::dim_mismatch(format!(
                "occupancy tensor must be rank 3 (X, Y, Z), got dims {other:?}"
            ))),
        }
    }
}

/// Bird's-eye-view grid: the Z axis of a voxel grid stacked into channels
/// (k-major, then feature channel). Lossless and invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    grid_spec: GridSpec,
    x_dim: usize,
    y_dim: usize,
    z_dim: usize,
    feat_channels: usize,
    data: Vec<f32>,
}

impl BevGrid {
    pub fn grid_spec(&self) -> &GridSpec {
        &self.grid_spec
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    /// Total channel count, exactly `Z * C`.
    pub fn channels(&self) -> usize {
        self.z_dim * self.feat_channels
    }

    pub fn at(&self, i: usize, j: usize, ch: usize) -> f32 {
        self.data[(i * self.y_dim + j) * self.channels() + ch]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![
                self.x_dim as u32,
                self.y_dim as u32,
                self.channels() as u32,
            ],
            self.data.clone(),
        )
        .expect("bev dims are consistent")
    }
}

/// Interpolation scheme for [`sample_to_voxels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// Trilinear over the 8 surrounding frustum cells, zero outside.
    Trilinear,
    /// Snap to the nearest frustum cell (round-half-away-from-zero), zero
    /// outside. Intended for oracle comparisons.
    Nearest,
}

/// Execution options for [`sample_to_voxels`].
#[derive(Debug, Clone, Copy)]
pub struct SamplingOptions {
    pub interp: InterpMode,
    /// Worker thread count; output is identical for any value.
    pub threads: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            interp: InterpMode::Trilinear,
            threads: 1,
        }
    }
}

/// Outer-product lift: `G(u, v, d, c) = weights(u, v, d) * features(u, v, c)`.
/// One-hot weights select a feature row per pixel; thickness-field weights
/// spread it across the responding bins.
pub fn lift_features(weights: &DepthVolume, features: &FeaturePlane) -> Result<FrustumGrid> {
    if weights.width() != features.width() || weights.height() != features.height() {
        return Err(Error::dim_mismatch(format!(
            "lift: weights ({}, {}) vs features ({}, {})",
            weights.width(),
            weights.height(),
            features.width(),
            features.height()
        )));
    }
    let (w, h, d) = weights.dims();
    let c = features.channels();
    let mut data = vec![0.0f32; w * h * d * c];
    let mut i = 0;
    for u in 0..w {
        for v in 0..h {
            for di in 0..d {
                let wt = weights.at(u, v, di);
                for ci in 0..c {
                    data[i] = wt * features.at(u, v, ci);
                    i += 1;
                }
            }
        }
    }
    FrustumGrid::new(w, h, d, c, data)
}

/// World-frame centers of every cell, ordered i-major then j then k.
pub fn voxel_centers(spec: &GridSpec) -> Result<Vec<[f64; 3]>> {
    let dims = spec.dims()?;
    let mut out = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                out.push(spec.center_of([i, j, k]));
            }
        }
    }
    Ok(out)
}

/// Precomputed projection chain: world homogeneous point to pixel
/// homogeneous coordinates, plus the rectified-camera depth row.
struct Projector {
    pixel: Matrix3x4<f64>,
    depth_row: Vector4<f64>,
}

impl Projector {
    fn new(calib: &CameraCalibration) -> Self {
        // cam = R0 * (Rtr * p + ttr) as a 4x4 on homogeneous world points.
        let mut world_to_cam = Matrix4::identity();
        world_to_cam
            .fixed_view_mut::<3, 4>(0, 0)
            .copy_from(&(calib.rectification * calib.lidar_to_camera));
        let pixel = calib.intrinsics * world_to_cam;
        let depth_row = world_to_cam.row(2).transpose();
        Self { pixel, depth_row }
    }

    #[inline]
    fn apply(&self, p: [f64; 3]) -> ([f64; 3], f64) {
        let hp = Vector4::new(p[0], p[1], p[2], 1.0);
        let hom = self.pixel * hp;
        let depth = self.depth_row.dot(&hp);
        ([hom.x, hom.y, hom.z], depth)
    }
}

/// Voxelize a frustum grid: each voxel center is projected into the image,
/// its rectified-camera depth converted to a continuous LID bin coordinate,
/// and the frustum interpolated at the resulting (u_F, v_F, z') sample.
/// Voxels behind the camera, outside the image, or outside `[d_min, d_max]`
/// receive zeros. Feature coordinates use the half-pixel convention
/// `u_F = (u + 0.5) / stride - 0.5`.
pub fn sample_to_voxels(
    frustum: &FrustumGrid,
    calib: &CameraCalibration,
    grid_spec: &GridSpec,
    bin_spec: &BinSpec,
    feature_stride: usize,
    opts: &SamplingOptions,
) -> Result<VoxelGrid> {
    if feature_stride == 0 {
        return Err(Error::invalid("feature stride must be >= 1"));
    }
    if frustum.depth_bins() != bin_spec.num_bins {
        return Err(Error::dim_mismatch(format!(
            "frustum has {} depth bins, bin spec has {}",
            frustum.depth_bins(),
            bin_spec.num_bins
        )));
    }
    let dims = grid_spec.dims()?;
    let channels = frustum.channels();
    let projector = Projector::new(calib);
    let full_w = (frustum.width() * feature_stride) as f64;
    let full_h = (frustum.height() * feature_stride) as f64;
    let stride = feature_stride as f64;

    let n_voxels = dims[0] * dims[1] * dims[2];
    let mut data = vec![0.0f32; n_voxels * channels];

    let fill = |flat: usize, out: &mut [f32]| {
        let i = flat / (dims[1] * dims[2]);
        let j = (flat / dims[2]) % dims[1];
        let k = flat % dims[2];
        let center = grid_spec.center_of([i, j, k]);
        let (hom, depth) = projector.apply(center);
        if depth <= 0.0 || hom[2].abs() < 1e-12 {
            return;
        }
        let u = hom[0] / hom[2];
        let v = hom[1] / hom[2];
        // Image bounds on pixel-center coordinates.
        if u < 0.0 || u > full_w - 1.0 || v < 0.0 || v > full_h - 1.0 {
            return;
        }
        let z = lid_continuous(depth, bin_spec);
        if z.out_of_range {
            return;
        }
        let uf = (u + 0.5) / stride - 0.5;
        let vf = (v + 0.5) / stride - 0.5;
        let zc = z.value - 0.5; // bin centers sit at integer coordinates
        match opts.interp {
            InterpMode::Trilinear => {
                sample_trilinear(frustum, uf, vf, zc, out);
            }
            InterpMode::Nearest => {
                sample_nearest(frustum, uf, vf, zc, out);
            }
        }
    };

    let threads = opts.threads.max(1);
    if threads == 1 {
        for (flat, chunk) in data.chunks_mut(channels).enumerate() {
            fill(flat, chunk);
        }
    } else {
        // Disjoint output chunks per worker; each voxel is a pure function
        // of the inputs, so scheduling cannot change the result.
        let per_thread = n_voxels.div_ceil(threads);
        std::thread::scope(|scope| {
            for (w_idx, slab) in data.chunks_mut(per_thread * channels).enumerate() {
                let fill = &fill;
                scope.spawn(move || {
                    let base = w_idx * per_thread;
                    for (off, chunk) in slab.chunks_mut(channels).enumerate() {
                        fill(base + off, chunk);
                    }
                });
            }
        });
    }

    VoxelGrid::new(*grid_spec, channels, data)
}

fn sample_trilinear(frustum: &FrustumGrid, uf: f64, vf: f64, zc: f64, out: &mut [f32]) {
    let u0 = uf.floor();
    let v0 = vf.floor();
    let d0 = zc.floor();
    let (fu, fv, fd) = (uf - u0, vf - v0, zc - d0);
    let mut acc = vec![0.0f64; out.len()];
    for (du, wu) in [(0i64, 1.0 - fu), (1, fu)] {
        for (dv, wv) in [(0i64, 1.0 - fv), (1, fv)] {
            for (dd, wd) in [(0i64, 1.0 - fd), (1, fd)] {
                let weight = wu * wv * wd;
                if weight == 0.0 {
                    continue;
                }
                let (ui, vi, di) = (u0 as i64 + du, v0 as i64 + dv, d0 as i64 + dd);
                if ui < 0
                    || vi < 0
                    || di < 0
                    || ui >= frustum.width() as i64
                    || vi >= frustum.height() as i64
                    || di >= frustum.depth_bins() as i64
                {
                    continue; // zero padding outside the frustum
                }
                for (c, slot) in acc.iter_mut().enumerate() {
                    *slot +=
                        weight * frustum.at(ui as usize, vi as usize, di as usize, c) as f64;
                }
            }
        }
    }
    for (slot, value) in out.iter_mut().zip(acc) {
        *slot = value as f32;
    }
}

fn sample_nearest(frustum: &FrustumGrid, uf: f64, vf: f64, zc: f64, out: &mut [f32]) {
    let (ui, vi, di) = (uf.round() as i64, vf.round() as i64, zc.round() as i64);
    if ui < 0
        || vi < 0
        || di < 0
        || ui >= frustum.width() as i64
        || vi >= frustum.height() as i64
        || di >= frustum.depth_bins() as i64
    {
        return;
    }
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = frustum.at(ui as usize, vi as usize, di as usize, c);
    }
}

/// Element-wise occupancy gate: `out(i, j, k, c) = occ(i, j, k) * v(i, j, k, c)`.
pub fn occupancy_gate(voxels: &VoxelGrid, occ: &OccupancyField) -> Result<VoxelGrid> {
    if voxels.dims() != occ.dims() {
        return Err(Error::dim_mismatch(format!(
            "gate: voxels {:?} vs occupancy {:?}",
            voxels.dims(),
            occ.dims()
        )));
    }
    let channels = voxels.channels();
    let mut out = voxels.clone();
    for (cell, chunk) in out.data_mut().chunks_mut(channels).enumerate() {
        let o = occ.data[cell];
        for value in chunk {
            *value *= o;
        }
    }
    Ok(out)
}

/// Stack the Z axis into channels: `BEV(i, j, k*C + c) = V(i, j, k, c)`.
pub fn collapse_to_bev(voxels: &VoxelGrid) -> BevGrid {
    let [x, y, z] = voxels.dims();
    let c = voxels.channels();
    // The voxel layout ((i*Y + j)*Z + k)*C + c is already k-major-then-c per
    // (i, j) cell, so the collapse is a reinterpretation of the same buffer.
    BevGrid {
        grid_spec: *voxels.grid_spec(),
        x_dim: x,
        y_dim: y,
        z_dim: z,
        feat_channels: c,
        data: voxels.data().to_vec(),
    }
}

/// Inverse of [`collapse_to_bev`], recovering the voxel grid bit-exactly.
pub fn expand_from_bev(bev: &BevGrid) -> Result<VoxelGrid> {
    VoxelGrid::new(bev.grid_spec, bev.feat_channels, bev.data.clone())
}
