//! Domain types shared across the pipeline.
//!
//! The canonical world frame is the LiDAR/ego frame: x forward, y left,
//! z up. Camera-frame quantities are converted on ingestion. All types are
//! immutable after construction.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use nalgebra::{Matrix3, Matrix3x4, Matrix4, Point3, Vector3, Vector4};

/// Reserved depth value meaning "no measurement" (KITTI depth-PNG convention).
pub const DEPTH_SENTINEL: f32 = 0.0;

/// Depth range plus bin count defining the LID discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub d_min: f64,
    pub d_max: f64,
    pub num_bins: usize,
}

impl BinSpec {
    /// Validated constructor: `d_min > 0`, `d_max > d_min`, `num_bins >= 2`.
    ///
    /// The LID formulas in [`crate::binning`] are total over any raw
    /// `BinSpec` with `d_max > d_min >= 0` and `num_bins >= 1`; this
    /// constructor enforces the stricter config contract.
    pub fn new(d_min: f64, d_max: f64, num_bins: usize) -> Result<Self> {
        if !d_min.is_finite() || !d_max.is_finite() {
            return Err(Error::non_finite("bin spec depth range"));
        }
        if d_min <= 0.0 {
            return Err(Error::invalid(format!("d_min {d_min} must be > 0")));
        }
        if d_max <= d_min {
            return Err(Error::invalid(format!(
                "d_max {d_max} must exceed d_min {d_min}"
            )));
        }
        if num_bins < 2 {
            return Err(Error::invalid(format!(
                "num_bins {num_bins} must be >= 2"
            )));
        }
        Ok(Self {
            d_min,
            d_max,
            num_bins,
        })
    }
}

/// Axis-aligned detection volume: closed ranges in meters plus an isotropic
/// voxel edge length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z_range: [f64; 2],
    pub voxel_size: f64,
}

impl GridSpec {
    pub fn new(
        x_range: [f64; 2],
        y_range: [f64; 2],
        z_range: [f64; 2],
        voxel_size: f64,
    ) -> Result<Self> {
        for (axis, r) in [('x', &x_range), ('y', &y_range), ('z', &z_range)] {
            if !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::non_finite(format!("{axis} range")));
            }
            if r[1] <= r[0] {
                return Err(Error::invalid(format!(
                    "{axis} range [{}, {}] is empty",
                    r[0], r[1]
                )));
            }
        }
        if !voxel_size.is_finite() || voxel_size <= 0.0 {
            return Err(Error::invalid(format!(
                "voxel size {voxel_size} must be positive"
            )));
        }
        Ok(Self {
            x_range,
            y_range,
            z_range,
            voxel_size,
        })
    }

    /// Voxel counts per axis: `round(range_length / voxel_size)`, requiring
    /// each range to be an integer multiple of the voxel size within 1e-9
    /// relative tolerance.
    pub fn dims(&self) -> Result<[usize; 3]> {
        let mut out = [0usize; 3];
        for (i, (axis, r)) in [('x', &self.x_range), ('y', &self.y_range), ('z', &self.z_range)]
            .into_iter()
            .enumerate()
        {
            let q = (r[1] - r[0]) / self.voxel_size;
            let n = q.round();
            if n < 1.0 || (q - n).abs() > 1e-9 * q.max(1.0) {
                return Err(Error::NonCommensurateRange {
                    axis,
                    min: r[0],
                    max: r[1],
                    voxel_size: self.voxel_size,
                });
            }
            out[i] = n as usize;
        }
        Ok(out)
    }

    pub fn min(&self) -> [f64; 3] {
        [self.x_range[0], self.y_range[0], self.z_range[0]]
    }

    pub fn max(&self) -> [f64; 3] {
        [self.x_range[1], self.y_range[1], self.z_range[1]]
    }

    /// World-frame center of cell `(i, j, k)`.
    pub fn center_of(&self, idx: [usize; 3]) -> [f64; 3] {
        let min = self.min();
        [
            min[0] + (idx[0] as f64 + 0.5) * self.voxel_size,
            min[1] + (idx[1] as f64 + 0.5) * self.voxel_size,
            min[2] + (idx[2] as f64 + 0.5) * self.voxel_size,
        ]
    }

    /// Cell containing a world point under half-open `[min, max)` binning,
    /// or `None` when the point lies outside the grid.
    pub fn voxel_index(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let dims = self.dims().ok()?;
        let min = self.min();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let q = (p[a] - min[a]) / self.voxel_size;
            if q.is_nan() || q < 0.0 {
                return None;
            }
            let i = q.floor() as usize;
            if i >= dims[a] {
                return None;
            }
            idx[a] = i;
        }
        Some(idx)
    }
}

/// How a full-resolution depth map is reduced to feature resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownsampleMode {
    /// Sample the center pixel of each stride block.
    Nearest,
    /// Minimum over valid pixels of each stride block (preserves close surfaces).
    MinPool,
}

/// Single-channel metric depth map. A value of [`DEPTH_SENTINEL`] marks a
/// pixel with no measurement. Stored u-major: index `(u, v)` maps to
/// `u * height + v`, matching blob dims `(W, H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("depth map dims must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::dim_mismatch(format!(
                "depth map {}x{} requires {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::non_finite("depth map value"));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("negative depth {v}")));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.data[u * self.height + v]
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.at(u, v) != DEPTH_SENTINEL
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.width as u32, self.height as u32],
            self.data.clone(),
        )
        .expect("depth map dims are consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let [w, h] = match t.dims() {
            [w, h] => [*w as usize, *h as usize],
            other => {
                return Err(Error::dim_mismatch(format!(
                    "depth tensor must be rank 2 (W, H), got dims {other:?}"
                )))
            }
        };
        Self::new(w, h, t.data().to_vec())
    }

    /// Reduce to feature resolution by an integer stride.
    pub fn downsample(&self, stride: usize, mode: DownsampleMode) -> Result<DepthMap> {
        if stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        if !self.width.is_multiple_of(stride) || !self.height.is_multiple_of(stride) {
            return Err(Error::dim_mismatch(format!(
                "depth map {}x{} not divisible by stride {}",
                self.width, self.height, stride
            )));
        }
        if stride == 1 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width / stride, self.height / stride);
        let mut data = vec![DEPTH_SENTINEL; w * h];
        for u in 0..w {
            for v in 0..h {
                let value = match mode {
                    DownsampleMode::Nearest => self.at(u * stride + stride / 2, v * stride + stride / 2),
                    DownsampleMode::MinPool => {
                        let mut best = f32::INFINITY;
                        for du in 0..stride {
                            for dv in 0..stride {
                                let d = self.at(u * stride + du, v * stride + dv);
                                if d != DEPTH_SENTINEL && d < best {
                                    best = d;
                                }
                            }
                        }
                        if best.is_finite() {
                            best
                        } else {
                            DEPTH_SENTINEL
                        }
                    }
                };
                data[u * h + v] = value;
            }
        }
        DepthMap::new(w, h, data)
    }
}

/// Projection of a world point into the image.
#[derive(Debug, Clone, Copy)]
pub struct PixelProjection {
    /// Full-resolution pixel column (pixel-center convention).
    pub u: f64,
    /// Full-resolution pixel row.
    pub v: f64,
    /// Depth along the rectified camera optical axis, in meters.
    pub depth: f64,
}

/// KITTI-style camera calibration: a 3x4 projection matrix, a 3x3
/// rectification, and the 3x4 rigid LiDAR-to-camera transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    pub intrinsics: Matrix3x4<f64>,
    pub rectification: Matrix3<f64>,
    pub lidar_to_camera: Matrix3x4<f64>,
}

impl CameraCalibration {
    /// All-identity calibration (useful for synthetic scenes where the world
    /// frame coincides with the camera frame).
    pub fn identity() -> Self {
        let mut p = Matrix3x4::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        let mut tr = Matrix3x4::zeros();
        tr.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        Self {
            intrinsics: p,
            rectification: Matrix3::identity(),
            lidar_to_camera: tr,
        }
    }

    /// World (LiDAR) point into the rectified camera frame.
    pub fn cam_from_world(&self, p: Point3<f64>) -> Point3<f64> {
        let rot = self.lidar_to_camera.fixed_view::<3, 3>(0, 0);
        let t = self.lidar_to_camera.column(3);
        let cam = rot * p.coords + Vector3::new(t[0], t[1], t[2]);
        Point3::from(self.rectification * cam)
    }

    /// Rectified camera point back into the world frame.
    pub fn world_from_cam(&self, p: Point3<f64>) -> Result<Point3<f64>> {
        let rect_inv = self
            .rectification
            .try_inverse()
            .ok_or(Error::SingularCalibration)?;
        let unrect = rect_inv * p.coords;
        let inv = self.lidar_from_camera()?;
        let rot = inv.fixed_view::<3, 3>(0, 0);
        let t = inv.column(3);
        Ok(Point3::from(rot * unrect + Vector3::new(t[0], t[1], t[2])))
    }

    /// Inverse of the rigid LiDAR-to-camera transform as a 3x4 matrix.
    pub fn lidar_from_camera(&self) -> Result<Matrix3x4<f64>> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 4>(0, 0).copy_from(&self.lidar_to_camera);
        let inv = m.try_inverse().ok_or(Error::SingularCalibration)?;
        Ok(inv.fixed_view::<3, 4>(0, 0).into_owned())
    }

    /// Project a world point through rectification and intrinsics. Returns
    /// `None` when the homogeneous scale vanishes; the caller is responsible
    /// for visibility checks (`depth > 0`, image bounds).
    pub fn project(&self, p: Point3<f64>) -> Option<PixelProjection> {
        let cam = self.cam_from_world(p);
        let hom = self.intrinsics * Vector4::new(cam.x, cam.y, cam.z, 1.0);
        if hom.z.abs() < 1e-12 {
            return None;
        }
        Some(PixelProjection {
            u: hom.x / hom.z,
            v: hom.y / hom.z,
            depth: cam.z,
        })
    }

    /// Camera optical center expressed in the world frame; this is the ray
    /// origin for occupancy labeling.
    pub fn camera_center_world(&self) -> Result<Point3<f64>> {
        let m = self.intrinsics.fixed_view::<3, 3>(0, 0).into_owned();
        let p4 = self.intrinsics.column(3).into_owned();
        let m_inv = m.try_inverse().ok_or(Error::SingularCalibration)?;
        let center_rect = Point3::from(-(m_inv * p4));
        self.world_from_cam(center_rect)
    }
}

/// Image feature plane (W_F, H_F, C). Finite values only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePlane {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeaturePlane {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::invalid("feature plane dims must be positive"));
        }
        if data.len() != width * height * channels {
            return Err(Error::dim_mismatch(format!(
                "feature plane ({width}, {height}, {channels}) requires {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("feature plane value"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn at(&self, u: usize, v: usize, c: usize) -> f32 {
        self.data[(u * self.height + v) * self.channels + c]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![
                self.width as u32,
                self.height as u32,
                self.channels as u32,
            ],
            self.data.clone(),
        )
        .expect("feature plane dims are consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims() {
            [w, h, c] => Self::new(*w as usize, *h as usize, *c as usize, t.data().to_vec()),
            other => Err(Error::dim_mismatch(format!(
                "feature tensor must be rank 3 (W, H, C), got dims {other:?}"
            ))),
        }
    }
}

/// Image-aligned feature volume (W_F, H_F, D, C).
#[derive(Debug, Clone, PartialEq)]
pub struct FrustumGrid {
    width: usize,
    height: usize,
    depth_bins: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FrustumGrid {
    pub fn new(
        width: usize,
        height: usize,
        depth_bins: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let n = width * height * depth_bins * channels;
        if n == 0 {
            return Err(Error::invalid("frustum grid dims must be positive"));
        }
        if data.len() != n {
            return Err(Error::dim_mismatch(format!(
                "frustum grid ({width}, {height}, {depth_bins}, {channels}) requires {n} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("frustum grid value"));
        }
        Ok(Self {
            width,
            height,
            depth_bins,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth_bins(&self) -> usize {
        self.depth_bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize, d: usize, c: usize) -> usize {
        ((u * self.height + v) * self.depth_bins + d) * self.channels + c
    }

    pub fn at(&self, u: usize, v: usize, d: usize, c: usize) -> f32 {
        self.data[self.index(u, v, d, c)]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![
                self.width as u32,
                self.height as u32,
                self.depth_bins as u32,
                self.channels as u32,
            ],
            self.data.clone(),
        )
        .expect("frustum dims are consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims() {
            [w, h, d, c] => Self::new(
                *w as usize,
                *h as usize,
                *d as usize,
                *c as usize,
                t.data().to_vec(),
            ),
            other => Err(Error::dim_mismatch(format!(
                "frustum tensor must be rank 4 (W, H, D, C), got dims {other:?}"
            ))),
        }
    }
}

/// Voxelized feature volume (X, Y, Z, C) tied to its grid spec.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    grid_spec: GridSpec,
    dims: [usize; 3],
    channels: usize,
    data: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(grid_spec: GridSpec, channels: usize, data: Vec<f32>) -> Result<Self> {
        let dims = grid_spec.dims()?;
        let n = dims[0] * dims[1] * dims[2] * channels;
        if channels == 0 {
            return Err(Error::invalid("voxel grid channels must be positive"));
        }
        if data.len() != n {
            return Err(Error::dim_mismatch(format!(
                "voxel grid {dims:?} x {channels} requires {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            grid_spec,
            dims,
            channels,
            data,
        })
    }

    pub fn zeros(grid_spec: GridSpec, channels: usize) -> Result<Self> {
        let dims = grid_spec.dims()?;
        Self::new(
            grid_spec,
            channels,
            vec![0.0; dims[0] * dims[1] * dims[2] * channels],
        )
    }

    pub fn grid_spec(&self) -> &GridSpec {
        &self.grid_spec
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize, c: usize) -> usize {
        ((i * self.dims[1] + j) * self.dims[2] + k) * self.channels + c
    }

    pub fn at(&self, i: usize, j: usize, k: usize, c: usize) -> f32 {
        self.data[self.index(i, j, k, c)]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![
                self.dims[0] as u32,
                self.dims[1] as u32,
                self.dims[2] as u32,
                self.channels as u32,
            ],
            self.data.clone(),
        )
        .expect("voxel dims are consistent")
    }

    pub fn from_tensor(t: &Tensor, grid_spec: GridSpec) -> Result<Self> {
        match t.dims() {
            [x, y, z, c] => {
                let dims = grid_spec.dims()?;
                if dims != [*x as usize, *y as usize, *z as usize] {
                    return Err(Error::dim_mismatch(format!(
                        "voxel tensor dims ({x}, {y}, {z}) disagree with grid spec dims {dims:?}"
                    )));
                }
                Self::new(grid_spec, *c as usize, t.data().to_vec())
            }
            other => Err(Error::dim_mismatch(format!(
                "voxel tensor must be rank 4 (X, Y, Z, C), got dims {other:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kitti_spec() -> GridSpec {
        GridSpec::new([2.0, 46.8], [-30.08, 30.08], [-3.0, 1.0], 0.16).unwrap()
    }

    #[test]
    fn kitti_grid_dims() {
        assert_eq!(kitti_spec().dims().unwrap(), [280, 376, 25]);
    }

    #[test]
    fn unit_cube_dims() {
        let spec = GridSpec::new([0.0, 1.0], [0.0, 1.0], [0.0, 1.0], 1.0).unwrap();
        assert_eq!(spec.dims().unwrap(), [1, 1, 1]);
    }

    #[test]
    fn non_commensurate_range() {
        let spec = GridSpec::new([0.0, 1.0], [0.0, 1.0], [0.0, 1.0], 0.3).unwrap();
        assert!(matches!(
            spec.dims(),
            Err(Error::NonCommensurateRange { axis: 'x', .. })
        ));
    }

    #[test]
    fn dims_reproduce_range_lengths() {
        let spec = kitti_spec();
        let dims = spec.dims().unwrap();
        for (d, r) in dims.iter().zip([spec.x_range, spec.y_range, spec.z_range]) {
            let len = r[1] - r[0];
            assert!((*d as f64 * spec.voxel_size - len).abs() <= 1e-9 * len);
        }
    }

    #[test]
    fn voxel_index_half_open() {
        let spec = GridSpec::new([0.0, 4.0], [0.0, 1.0], [0.0, 1.0], 1.0).unwrap();
        assert_eq!(spec.voxel_index([0.0, 0.5, 0.5]), Some([0, 0, 0]));
        assert_eq!(spec.voxel_index([3.999, 0.5, 0.5]), Some([3, 0, 0]));
        assert_eq!(spec.voxel_index([4.0, 0.5, 0.5]), None);
        assert_eq!(spec.voxel_index([-0.001, 0.5, 0.5]), None);
    }

    #[test]
    fn bin_spec_validation() {
        assert!(BinSpec::new(2.0, 46.8, 80).is_ok());
        assert!(BinSpec::new(0.0, 46.8, 80).is_err());
        assert!(BinSpec::new(2.0, 1.0, 80).is_err());
        assert!(BinSpec::new(2.0, 46.8, 1).is_err());
    }

    #[test]
    fn depth_map_rejects_negative_and_non_finite() {
        assert!(DepthMap::new(1, 2, vec![0.0, 1.5]).is_ok());
        assert!(DepthMap::new(1, 2, vec![-1.0, 1.5]).is_err());
        assert!(DepthMap::new(1, 2, vec![f32::NAN, 1.5]).is_err());
    }

    #[test]
    fn depth_downsample_modes() {
        // 4x2 map, stride 2 -> 2x1. Values indexed (u, v).
        let mut data = vec![0.0f32; 8];
        // block u in {0,1}: values 5, 3, 7, sentinel
        data[0] = 5.0; // (0,0)
        data[1] = 3.0; // (0,1)
        data[2] = 7.0; // (1,0)
        data[3] = 0.0; // (1,1) sentinel
        // block u in {2,3}: all sentinel
        let map = DepthMap::new(4, 2, data).unwrap();

        let nearest = map.downsample(2, DownsampleMode::Nearest).unwrap();
        // center pixel of block (0,0) is (1,1) -> sentinel
        assert_eq!(nearest.at(0, 0), DEPTH_SENTINEL);

        let min = map.downsample(2, DownsampleMode::MinPool).unwrap();
        assert_eq!(min.at(0, 0), 3.0);
        assert_eq!(min.at(1, 0), DEPTH_SENTINEL);
    }

    #[test]
    fn lidar_to_camera_inverse_is_identity() {
        // A nontrivial rigid transform.
        let rot = nalgebra::Rotation3::from_euler_angles(0.1, -0.2, 0.3);
        let mut tr = Matrix3x4::zeros();
        tr.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        tr.set_column(3, &Vector3::new(0.3, -0.1, 0.05));
        let calib = CameraCalibration {
            intrinsics: CameraCalibration::identity().intrinsics,
            rectification: Matrix3::identity(),
            lidar_to_camera: tr,
        };
        let p = Point3::new(7.0, -2.0, 1.5);
        let cam = calib.cam_from_world(p);
        let back = calib.world_from_cam(cam).unwrap();
        assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn projection_finite_for_positive_depth() {
        let calib = CameraCalibration::identity();
        let proj = calib.project(Point3::new(0.5, -0.25, 4.0)).unwrap();
        assert!(proj.u.is_finite() && proj.v.is_finite());
        assert!((proj.depth - 4.0).abs() < 1e-12);
    }
}
