//! Independent oracles and fixtures shared by the integration suites.
//!
//! Every oracle here re-derives its answer through a different route than
//! the library (accumulation instead of closed forms, dense sampling instead
//! of DDA, scalar loops instead of fused kernels, half-space tests instead
//! of frame rotation) so agreement is evidence, not tautology.

#![allow(dead_code)]

use dtf_core::occupancy::OrientedBox3D;
use dtf_core::repr::{DepthVolume, ExtensionMask, FocalParams, ThicknessField};
use dtf_core::types::{BinSpec, CameraCalibration, FrustumGrid, GridSpec};
use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector3, Vector4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::HashSet;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// LID oracle: edges by width accumulation, index by linear scan.
// ---------------------------------------------------------------------------

/// Bin edges built by accumulating the linearly growing widths rather than
/// the closed-form triangular sum.
pub fn oracle_lid_edges(spec: &BinSpec) -> Vec<f64> {
    let d = spec.num_bins as f64;
    let delta = 2.0 * (spec.d_max - spec.d_min) / (d * (d + 1.0));
    let mut edges = Vec::with_capacity(spec.num_bins + 1);
    let mut edge = spec.d_min;
    edges.push(edge);
    for i in 0..spec.num_bins {
        edge += delta * (i as f64 + 1.0);
        edges.push(edge);
    }
    edges
}

/// Bin index by linear scan over the oracle edges, clamped at both ends.
pub fn oracle_lid_index(z: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    if z >= edges[bins] {
        return bins - 1;
    }
    for i in 0..bins {
        if z >= edges[i] && z < edges[i + 1] {
            return i;
        }
    }
    0
}

// ---------------------------------------------------------------------------
// Projection + trilinear sampling oracle.
// ---------------------------------------------------------------------------

/// Per-voxel brute-force reimplementation of the frustum sampling chain:
/// explicit matrix products per voxel, scalar 8-corner interpolation.
pub fn oracle_sample_voxel(
    frustum: &FrustumGrid,
    calib: &CameraCalibration,
    grid: &GridSpec,
    bins: &BinSpec,
    stride: usize,
    idx: [usize; 3],
) -> Vec<f64> {
    let channels = frustum.channels();
    let zeros = vec![0.0f64; channels];

    let min = grid.min();
    let center = [
        min[0] + (idx[0] as f64 + 0.5) * grid.voxel_size,
        min[1] + (idx[1] as f64 + 0.5) * grid.voxel_size,
        min[2] + (idx[2] as f64 + 0.5) * grid.voxel_size,
    ];

    let p = Vector3::new(center[0], center[1], center[2]);
    let tr_rot = calib.lidar_to_camera.fixed_view::<3, 3>(0, 0);
    let tr_t = calib.lidar_to_camera.column(3);
    let cam = calib.rectification * (tr_rot * p + Vector3::new(tr_t[0], tr_t[1], tr_t[2]));
    let depth = cam.z;
    if depth <= 0.0 {
        return zeros;
    }
    let hom = calib.intrinsics * Vector4::new(cam.x, cam.y, cam.z, 1.0);
    if hom.z.abs() < 1e-12 {
        return zeros;
    }
    let u = hom.x / hom.z;
    let v = hom.y / hom.z;
    let full_w = (frustum.width() * stride) as f64;
    let full_h = (frustum.height() * stride) as f64;
    if u < 0.0 || u > full_w - 1.0 || v < 0.0 || v > full_h - 1.0 {
        return zeros;
    }
    if depth < bins.d_min || depth > bins.d_max {
        return zeros;
    }
    let d = bins.num_bins as f64;
    let delta = 2.0 * (bins.d_max - bins.d_min) / (d * (d + 1.0));
    let z_prime = -0.5 + 0.5 * (1.0 + 8.0 * (depth - bins.d_min) / delta).sqrt();

    let uf = (u + 0.5) / stride as f64 - 0.5;
    let vf = (v + 0.5) / stride as f64 - 0.5;
    let zc = z_prime - 0.5;

    let (u0, v0, d0) = (uf.floor(), vf.floor(), zc.floor());
    let (fu, fv, fd) = (uf - u0, vf - v0, zc - d0);
    let mut acc = zeros;
    for du in 0..2i64 {
        for dv in 0..2i64 {
            for dd in 0..2i64 {
                let wu = if du == 0 { 1.0 - fu } else { fu };
                let wv = if dv == 0 { 1.0 - fv } else { fv };
                let wd = if dd == 0 { 1.0 - fd } else { fd };
                let w = wu * wv * wd;
                if w == 0.0 {
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
                    continue;
                }
                for (c, slot) in acc.iter_mut().enumerate() {
                    *slot += w * frustum.at(ui as usize, vi as usize, di as usize, c) as f64;
                }
            }
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Ray oracles: dense sampling and exact per-cell chord lengths.
// ---------------------------------------------------------------------------

/// All cells hit by sampling the segment at the given arc-length step.
pub fn dense_ray_cells(
    origin: [f64; 3],
    endpoint: [f64; 3],
    grid: &GridSpec,
    step: f64,
) -> HashSet<[usize; 3]> {
    let dims = grid.dims().unwrap();
    let min = grid.min();
    let dir = [
        endpoint[0] - origin[0],
        endpoint[1] - origin[1],
        endpoint[2] - origin[2],
    ];
    let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let n = (len / step).ceil() as usize;
    let mut cells = HashSet::new();
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let p = [
            origin[0] + t * dir[0],
            origin[1] + t * dir[1],
            origin[2] + t * dir[2],
        ];
        let mut idx = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            let q = (p[a] - min[a]) / grid.voxel_size;
            if q < 0.0 {
                inside = false;
                break;
            }
            let c = q.floor() as usize;
            if c >= dims[a] {
                inside = false;
                break;
            }
            idx[a] = c;
        }
        if inside {
            cells.insert(idx);
        }
    }
    cells
}

/// Exact length of the segment's intersection with one cell (slab clip).
pub fn chord_length(
    origin: [f64; 3],
    endpoint: [f64; 3],
    grid: &GridSpec,
    cell: [usize; 3],
) -> f64 {
    let min = grid.min();
    let dir = [
        endpoint[0] - origin[0],
        endpoint[1] - origin[1],
        endpoint[2] - origin[2],
    ];
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for a in 0..3 {
        let lo = min[a] + cell[a] as f64 * grid.voxel_size;
        let hi = lo + grid.voxel_size;
        if dir[a] == 0.0 {
            if origin[a] < lo || origin[a] > hi {
                return 0.0;
            }
            continue;
        }
        let mut ta = (lo - origin[a]) / dir[a];
        let mut tb = (hi - origin[a]) / dir[a];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    if t0.is_nan() || t1.is_nan() || t1 <= t0 {
        return 0.0;
    }
    let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    (t1 - t0) * len
}

// ---------------------------------------------------------------------------
// Oriented-box oracle: half-space tests against the box axes.
// ---------------------------------------------------------------------------

pub fn oracle_point_in_box(p: [f64; 3], b: &OrientedBox3D) -> bool {
    let ux = [b.yaw.cos(), b.yaw.sin(), 0.0];
    let uy = [-b.yaw.sin(), b.yaw.cos(), 0.0];
    let uz = [0.0, 0.0, 1.0];
    let d = [
        p[0] - b.center[0],
        p[1] - b.center[1],
        p[2] - b.center[2],
    ];
    let dot = |a: [f64; 3]| d[0] * a[0] + d[1] * a[1] + d[2] * a[2];
    dot(ux).abs() <= b.length / 2.0 && dot(uy).abs() <= b.width / 2.0 && dot(uz).abs() <= b.height / 2.0
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle.
// ---------------------------------------------------------------------------

/// Max relative error between the analytic gradient and central finite
/// differences (entries where both are ~0 are skipped).
pub fn fd_max_rel_error(
    pred: &ThicknessField,
    target: &DepthVolume,
    mask: &ExtensionMask,
    params: &FocalParams,
    h: f64,
) -> f64 {
    let analytic =
        dtf_core::repr::thickness_focal_loss(pred, target, mask, params).unwrap();
    let base = pred.volume().clone();
    let mut max_rel = 0.0f64;
    for i in 0..base.data().len() {
        let mut plus = base.clone();
        plus.data_mut()[i] = (base.data()[i] as f64 + h) as f32;
        let mut minus = base.clone();
        minus.data_mut()[i] = (base.data()[i] as f64 - h) as f32;
        let step = plus.data()[i] as f64 - minus.data()[i] as f64;
        let lp = dtf_core::repr::thickness_focal_loss(
            &ThicknessField::from_volume(plus).unwrap(),
            target,
            mask,
            params,
        )
        .unwrap()
        .loss;
        let lm = dtf_core::repr::thickness_focal_loss(
            &ThicknessField::from_volume(minus).unwrap(),
            target,
            mask,
            params,
        )
        .unwrap()
        .loss;
        let fd = (lp - lm) / step;
        let an = analytic.grad.data()[i] as f64;
        let scale = an.abs().max(fd.abs());
        if scale > 1e-12 {
            max_rel = max_rel.max((fd - an).abs() / scale);
        }
    }
    max_rel
}

// ---------------------------------------------------------------------------
// Fixtures.
// ---------------------------------------------------------------------------

/// Ideal forward-looking camera: world = LiDAR frame, camera at the origin
/// looking along +x, pinhole intrinsics.
pub fn forward_camera(f: f64, cx: f64, cy: f64) -> CameraCalibration {
    let mut tr = Matrix3x4::zeros();
    tr[(0, 1)] = -1.0;
    tr[(1, 2)] = -1.0;
    tr[(2, 0)] = 1.0;
    let mut p = Matrix3x4::zeros();
    p[(0, 0)] = f;
    p[(0, 2)] = cx;
    p[(1, 1)] = f;
    p[(1, 2)] = cy;
    p[(2, 2)] = 1.0;
    CameraCalibration {
        intrinsics: p,
        rectification: Matrix3::identity(),
        lidar_to_camera: tr,
    }
}

/// Realistic camera-2-style calibration: axis permutation with a small
/// mounting rotation, rectification wobble, stereo offset column.
pub fn realistic_camera() -> CameraCalibration {
    let perm = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    let wobble = Rotation3::from_euler_angles(0.004, -0.006, 0.002);
    let rot = wobble.matrix() * perm;
    let mut tr = Matrix3x4::zeros();
    tr.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    tr.set_column(3, &Vector3::new(-0.003, -0.075, -0.27));

    let rect = Rotation3::from_euler_angles(-0.002, 0.001, 0.003);

    let mut p2 = Matrix3x4::zeros();
    p2[(0, 0)] = 707.0;
    p2[(0, 2)] = 604.0;
    p2[(0, 3)] = 45.75;
    p2[(1, 1)] = 707.0;
    p2[(1, 2)] = 180.0;
    p2[(1, 3)] = -0.34;
    p2[(2, 2)] = 1.0;
    p2[(2, 3)] = 0.005;

    CameraCalibration {
        intrinsics: p2,
        rectification: rect.matrix().into_owned(),
        lidar_to_camera: tr,
    }
}

/// The small synthetic scene used across suites: 20^3 grid in front of a
/// forward camera with an 8x8 feature plane at stride 2.
pub struct SmallScene {
    pub calib: CameraCalibration,
    pub grid: GridSpec,
    pub bins: BinSpec,
    pub stride: usize,
    pub feat_w: usize,
    pub feat_h: usize,
}

pub fn small_scene() -> SmallScene {
    SmallScene {
        calib: forward_camera(6.0, 7.5, 7.5),
        grid: GridSpec::new([2.0, 6.0], [-2.0, 2.0], [-2.0, 2.0], 0.2).unwrap(),
        bins: BinSpec::new(2.0, 6.0, 10).unwrap(),
        stride: 2,
        feat_w: 8,
        feat_h: 8,
    }
}

/// Random oriented box within the small-scene grid.
pub fn random_box(rng: &mut StdRng, grid: &GridSpec) -> OrientedBox3D {
    let min = grid.min();
    let max = grid.max();
    let center = [
        rng.gen_range(min[0]..max[0]),
        rng.gen_range(min[1]..max[1]),
        rng.gen_range(min[2]..max[2]),
    ];
    OrientedBox3D::new(
        center,
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..3.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

/// Random binary supervision instance of the acceptance shape: a depth map
/// with sentinel holes, its one-hot/mask/target at a random radius, and an
/// interior prediction.
pub struct LossInstance {
    pub pred: ThicknessField,
    pub target: DepthVolume,
    pub mask: ExtensionMask,
}

pub fn random_loss_instance(rng: &mut StdRng, w: usize, h: usize, d: usize) -> LossInstance {
    use dtf_core::repr::{encode_one_hot, extension_mask, soft_extended_target};
    use dtf_core::types::DepthMap;

    let bins = BinSpec {
        d_min: 2.0,
        d_max: 10.0,
        num_bins: d,
    };
    let depth: Vec<f32> = (0..w * h)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(2.0..10.0)
            }
        })
        .collect();
    let map = DepthMap::new(w, h, depth).unwrap();
    let one_hot = encode_one_hot(&map, &bins).unwrap();
    let radius = rng.gen_range(0..=3usize);
    let mask = extension_mask(&one_hot, radius);
    let target = soft_extended_target(one_hot.volume(), &mask).unwrap();
    let pred_data: Vec<f32> = (0..w * h * d).map(|_| rng.gen_range(0.05..0.95)).collect();
    let pred =
        ThicknessField::from_volume(DepthVolume::new(w, h, d, pred_data).unwrap()).unwrap();
    LossInstance { pred, target, mask }
}
