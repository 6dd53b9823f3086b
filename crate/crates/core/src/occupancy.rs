//! Tri-state occupancy labels over a voxel grid: OCCUPIED from point hits
//! and refined-box interiors, FREE from camera-ray traversal, UNKNOWN
//! elsewhere. Label sources merge through the OCCUPIED > FREE > UNKNOWN
//! lattice, so results are independent of processing order.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::types::GridSpec;

/// Tri-state voxel label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelState {
    Occupied,
    Free,
    Unknown,
}

impl LabelState {
    /// Blob encoding: OCCUPIED -> 1.0, FREE -> 0.0, UNKNOWN -> -1.0.
    pub fn encode(self) -> f32 {
        match self {
            LabelState::Occupied => 1.0,
            LabelState::Free => 0.0,
            LabelState::Unknown => -1.0,
        }
    }

    pub fn decode(value: f32) -> Result<Self> {
        if value == 1.0 {
            Ok(LabelState::Occupied)
        } else if value == 0.0 {
            Ok(LabelState::Free)
        } else if value == -1.0 {
            Ok(LabelState::Unknown)
        } else {
            Err(Error::invalid(format!(
                "label value {value} is not one of 1, 0, -1"
            )))
        }
    }

    /// Join in the OCCUPIED > FREE > UNKNOWN lattice (commutative,
    /// associative, idempotent).
    pub fn join(self, other: Self) -> Self {
        use LabelState::*;
        match (self, other) {
            (Occupied, _) | (_, Occupied) => Occupied,
            (Free, _) | (_, Free) => Free,
            _ => Unknown,
        }
    }
}

/// Tri-state label grid over a voxel spec.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyLabelGrid {
    grid_spec: GridSpec,
    dims: [usize; 3],
    states: Vec<LabelState>,
}

impl OccupancyLabelGrid {
    pub fn unknown(grid_spec: GridSpec) -> Result<Self> {
        let dims = grid_spec.dims()?;
        Ok(Self {
            grid_spec,
            dims,
            states: vec![LabelState::Unknown; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn grid_spec(&self) -> &GridSpec {
        &self.grid_spec
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    pub fn at(&self, idx: [usize; 3]) -> LabelState {
        self.states[self.flat(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], state: LabelState) {
        let i = self.flat(idx);
        self.states[i] = state;
    }

    pub fn states(&self) -> &[LabelState] {
        &self.states
    }

    pub fn count(&self, state: LabelState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![
                self.dims[0] as u32,
                self.dims[1] as u32,
                self.dims[2] as u32,
            ],
            self.states.iter().map(|s| s.encode()).collect(),
        )
        .expect("label dims are consistent")
    }

    pub fn from_tensor(t: &Tensor, grid_spec: GridSpec) -> Result<Self> {
        let dims = grid_spec.dims()?;
        match t.dims() {
            [x, y, z] if [*x as usize, *y as usize, *z as usize] == dims => {}
            other => {
                return Err(Error::dim_mismatch(format!(
                    "label tensor dims {other:?} disagree with grid spec dims {dims:?}"
                )))
            }
        }
        let states = t
            .data()
            .iter()
            .map(|&v| LabelState::decode(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid_spec,
            dims,
            states,
        })
    }
}

/// World-frame point cloud (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// 7-DoF oriented box: geometric center, dims (h, w, l), yaw about the
/// world vertical axis (0 = heading along +x), normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox3D {
    pub center: [f64; 3],
    pub height: f64,
    pub width: f64,
    pub length: f64,
    pub yaw: f64,
}

impl OrientedBox3D {
    pub fn new(center: [f64; 3], height: f64, width: f64, length: f64, yaw: f64) -> Result<Self> {
        if center.iter().any(|c| !c.is_finite()) || !yaw.is_finite() {
            return Err(Error::non_finite("box center or yaw"));
        }
        for (name, d) in [("height", height), ("width", width), ("length", length)] {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::invalid(format!("box {name} {d} must be positive")));
            }
        }
        Ok(Self {
            center,
            height,
            width,
            length,
            yaw: normalize_yaw(yaw),
        })
    }

    /// The 8 corners in the world frame.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (s, c) = self.yaw.sin_cos();
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    let x = sx * self.length;
                    let y = sy * self.width;
                    let z = sz * self.height;
                    out[i] = [
                        self.center[0] + c * x - s * y,
                        self.center[1] + s * x + c * y,
                        self.center[2] + z,
                    ];
                    i += 1;
                }
            }
        }
        out
    }
}

/// Normalize an angle to (-pi, pi].
pub fn normalize_yaw(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// A traversal step: the cell plus its entry/exit parameters on the segment
/// (t in [0, 1] along origin -> endpoint).
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellSpan {
    cell: [usize; 3],
    t_in: f64,
    t_out: f64,
}

/// Exact Amanatides-Woo traversal of the segment clipped to the grid.
/// Returns cells whose chord has strictly positive length, in order.
fn segment_cells(origin: [f64; 3], endpoint: [f64; 3], spec: &GridSpec) -> Result<Vec<CellSpan>> {
    if origin == endpoint {
        return Err(Error::DegenerateRay);
    }
    let dims = spec.dims()?;
    let min = spec.min();
    let max = spec.max();
    let dir = [
        endpoint[0] - origin[0],
        endpoint[1] - origin[1],
        endpoint[2] - origin[2],
    ];

    // Clip t in [0, 1] to the grid AABB (slab method, NaN-safe).
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < min[a] || origin[a] > max[a] {
                return Ok(Vec::new());
            }
            continue;
        }
        let mut ta = (min[a] - origin[a]) / dir[a];
        let mut tb = (max[a] - origin[a]) / dir[a];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    if t0.is_nan() || t1.is_nan() || t0 >= t1 {
        return Ok(Vec::new());
    }

    // Start cell at the entry point, clamped into range against boundary
    // rounding.
    let entry = [
        origin[0] + t0 * dir[0],
        origin[1] + t0 * dir[1],
        origin[2] + t0 * dir[2],
    ];
    let mut cell = [0usize; 3];
    for a in 0..3 {
        let q = ((entry[a] - min[a]) / spec.voxel_size).floor();
        cell[a] = (q.max(0.0) as usize).min(dims[a] - 1);
    }

    // Per-axis time to next boundary and per-cell time step.
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let mut step = [0isize; 3];
    for a in 0..3 {
        if dir[a] > 0.0 {
            step[a] = 1;
            let boundary = min[a] + (cell[a] as f64 + 1.0) * spec.voxel_size;
            t_max[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = spec.voxel_size / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            let boundary = min[a] + cell[a] as f64 * spec.voxel_size;
            t_max[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = spec.voxel_size / -dir[a];
        }
    }

    let mut spans = Vec::new();
    let mut t = t0;
    loop {
        let t_next = t_max[0].min(t_max[1]).min(t_max[2]).min(t1);
        if t_next > t {
            spans.push(CellSpan {
                cell,
                t_in: t,
                t_out: t_next,
            });
        }
        if t_next >= t1 {
            break;
        }
        // Advance every axis whose boundary is crossed at t_next; ties step
        // diagonally and skip the zero-chord corner cells.
        let mut out_of_grid = false;
        for a in 0..3 {
            if t_max[a] == t_next {
                let next = cell[a] as isize + step[a];
                if next < 0 || next >= dims[a] as isize {
                    out_of_grid = true;
                    break;
                }
                cell[a] = next as usize;
                t_max[a] += t_delta[a];
            }
        }
        if out_of_grid {
            break;
        }
        t = t_next;
    }
    Ok(spans)
}

/// Ordered voxels the open segment passes through with positive length,
/// excluding the voxel containing the endpoint (the hit voxel).
pub fn traverse_ray(
    origin: [f64; 3],
    endpoint: [f64; 3],
    spec: &GridSpec,
) -> Result<Vec<[usize; 3]>> {
    let spans = segment_cells(origin, endpoint, spec)?;
    let hit = spec.voxel_index(endpoint);
    Ok(spans
        .into_iter()
        .map(|s| s.cell)
        .filter(|c| Some(*c) != hit)
        .collect())
}

/// Voxel containing the ray endpoint, when inside the grid.
pub fn hit_voxel(endpoint: [f64; 3], spec: &GridSpec) -> Option<[usize; 3]> {
    spec.voxel_index(endpoint)
}

/// Occupancy labels from a point cloud: a voxel containing any point is
/// OCCUPIED; a voxel traversed by any sensor-origin -> point ray and holding
/// no point is FREE; everything else is UNKNOWN. OCCUPIED dominates FREE.
/// Points outside the grid contribute only their ray's in-grid free segment.
pub fn point_cloud_labels(
    points: &PointCloud,
    sensor_origin: [f64; 3],
    spec: &GridSpec,
) -> Result<OccupancyLabelGrid> {
    let mut grid = OccupancyLabelGrid::unknown(*spec)?;
    let dims = grid.dims;
    let mut occupied = vec![false; dims[0] * dims[1] * dims[2]];
    let mut free = vec![false; dims[0] * dims[1] * dims[2]];

    for &p in points.points() {
        if let Some(idx) = spec.voxel_index(p) {
            occupied[grid.flat(idx)] = true;
        }
    }
    for &p in points.points() {
        if p == sensor_origin {
            continue;
        }
        for cell in traverse_ray(sensor_origin, p, spec)? {
            free[grid.flat(cell)] = true;
        }
    }
    for i in 0..grid.states.len() {
        grid.states[i] = if occupied[i] {
            LabelState::Occupied
        } else if free[i] {
            LabelState::Free
        } else {
            LabelState::Unknown
        };
    }
    Ok(grid)
}

/// Scale a box about its center, keeping center and yaw bit-identical.
pub fn shrink_box(b: &OrientedBox3D, scale: f64) -> Result<OrientedBox3D> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::BadScale { scale });
    }
    Ok(OrientedBox3D {
        center: b.center,
        height: b.height * scale,
        width: b.width * scale,
        length: b.length * scale,
        yaw: b.yaw,
    })
}

/// Closed-boundary containment test in the box frame: translate by -center,
/// rotate by -yaw about vertical, then |x'| <= l/2, |y'| <= w/2, |z'| <= h/2.
pub fn point_in_box(p: [f64; 3], b: &OrientedBox3D) -> bool {
    let dx = p[0] - b.center[0];
    let dy = p[1] - b.center[1];
    let dz = p[2] - b.center[2];
    let (s, c) = b.yaw.sin_cos();
    let local_x = c * dx + s * dy;
    let local_y = -s * dx + c * dy;
    local_x.abs() <= b.length / 2.0 && local_y.abs() <= b.width / 2.0 && dz.abs() <= b.height / 2.0
}

/// Occupancy labels from refined boxes: a voxel is OCCUPIED iff its center
/// lies in any box shrunk by `scale`; box labels assert no free space, so
/// all other voxels stay UNKNOWN.
pub fn box_labels(
    boxes: &[OrientedBox3D],
    scale: f64,
    spec: &GridSpec,
) -> Result<OccupancyLabelGrid> {
    let shrunk: Vec<OrientedBox3D> = boxes
        .iter()
        .map(|b| shrink_box(b, scale))
        .collect::<Result<_>>()?;
    let mut grid = OccupancyLabelGrid::unknown(*spec)?;
    let dims = grid.dims;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let center = spec.center_of([i, j, k]);
                if shrunk.iter().any(|b| point_in_box(center, b)) {
                    grid.set([i, j, k], LabelState::Occupied);
                }
            }
        }
    }
    Ok(grid)
}

/// Per-voxel lattice join of two label grids built over the same spec.
pub fn union_labels(
    a: &OccupancyLabelGrid,
    b: &OccupancyLabelGrid,
) -> Result<OccupancyLabelGrid> {
    if a.grid_spec != b.grid_spec {
        return Err(Error::SpecMismatch);
    }
    let mut out = a.clone();
    for (s, &o) in out.states.iter_mut().zip(b.states.iter()) {
        *s = s.join(o);
    }
    Ok(out)
}
