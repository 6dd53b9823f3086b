//! Linear-increasing discretization (LID) of metric depth.
//!
//! Bin widths grow linearly with index so near-range depth is resolved
//! finely: with `delta = 2 (d_max - d_min) / (D (D + 1))`,
//!
//! ```text
//! edge_i  = d_min + delta * i * (i + 1) / 2          (i = 0..=D)
//! width_i = delta * (i + 1)                          (i = 0..D)
//! z'      = -0.5 + 0.5 * sqrt(1 + 8 (z - d_min) / delta)
//! z       = d_min + delta * z' * (z' + 1) / 2
//! ```
//!
//! All functions are pure and total over any `BinSpec` with
//! `d_max > d_min >= 0` and `num_bins >= 1`; see [`BinSpec::new`] for the
//! stricter config-level contract.

use crate::error::{Error, Result};
use crate::types::BinSpec;

/// Result of a clamping conversion: the clamped value plus a flag noting
/// that the input fell outside `[d_min, d_max]` (depth estimators routinely
/// emit values past the far plane).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped<T> {
    pub value: T,
    pub out_of_range: bool,
}

/// The bin edges derived from a `BinSpec`: `num_bins + 1` strictly
/// increasing depths spanning exactly `[d_min, d_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    edges: Vec<f64>,
}

impl BinEdges {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Width of bin `i`.
    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }
}

/// Per-bin width increment `delta`.
pub fn lid_delta(spec: &BinSpec) -> f64 {
    let d = spec.num_bins as f64;
    2.0 * (spec.d_max - spec.d_min) / (d * (d + 1.0))
}

/// Closed-form bin edges.
pub fn lid_edges(spec: &BinSpec) -> BinEdges {
    let delta = lid_delta(spec);
    let edges = (0..=spec.num_bins)
        .map(|i| {
            let i = i as f64;
            spec.d_min + delta * i * (i + 1.0) / 2.0
        })
        .collect();
    BinEdges { edges }
}

/// Continuous bin coordinate of a metric depth. Monotone increasing on
/// `[d_min, d_max]`, mapping `d_min -> 0` and `d_max -> D`. Depths outside
/// the range clamp and set the flag.
pub fn lid_continuous(z: f64, spec: &BinSpec) -> Clamped<f64> {
    let out_of_range = z < spec.d_min || z > spec.d_max;
    let zc = z.clamp(spec.d_min, spec.d_max);
    let delta = lid_delta(spec);
    let value = -0.5 + 0.5 * (1.0 + 8.0 * (zc - spec.d_min) / delta).sqrt();
    Clamped {
        value,
        out_of_range,
    }
}

/// Bin index of a metric depth: floor of [`lid_continuous`], clamped to
/// `[0, D-1]` (so `z = d_max` lands in the last bin).
pub fn lid_index(z: f64, spec: &BinSpec) -> Clamped<usize> {
    let c = lid_continuous(z, spec);
    let idx = (c.value.floor() as isize)
        .clamp(0, spec.num_bins as isize - 1) as usize;
    Clamped {
        value: idx,
        out_of_range: c.out_of_range,
    }
}

/// Inverse of [`lid_continuous`]: metric depth of a continuous bin
/// coordinate in `[0, D]`.
pub fn lid_depth_of(z_prime: f64, spec: &BinSpec) -> Result<f64> {
    if !(0.0..=spec.num_bins as f64).contains(&z_prime) {
        return Err(Error::OutOfRange {
            context: format!(
                "bin coordinate {z_prime} outside [0, {}]",
                spec.num_bins
            ),
        });
    }
    let delta = lid_delta(spec);
    Ok(spec.d_min + delta * z_prime * (z_prime + 1.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: locate the bin by linear scan over the edges.
    fn edge_scan_index(z: f64, edges: &BinEdges) -> usize {
        let e = edges.edges();
        let d = edges.num_bins();
        if z >= e[d] {
            return d - 1;
        }
        for i in 0..d {
            if z >= e[i] && z < e[i + 1] {
                return i;
            }
        }
        0
    }

    fn kitti_bins() -> BinSpec {
        BinSpec::new(2.0, 46.8, 80).unwrap()
    }

    #[test]
    fn kitti_delta_and_last_edge() {
        let spec = kitti_bins();
        let delta = lid_delta(&spec);
        assert!((delta - 89.6 / 6480.0).abs() < 1e-15);
        assert!((delta - 0.01382716).abs() < 1e-8);
        let edges = lid_edges(&spec);
        assert_eq!(edges.edges().len(), 81);
        assert!((edges.edges()[80] - 46.8).abs() <= 1e-9 * 46.8);
        assert_eq!(edges.edges()[0], 2.0);
    }

    #[test]
    fn single_bin_spans_range() {
        // Raw construction: the formulas are total for D = 1, d_min = 0.
        let spec = BinSpec {
            d_min: 0.0,
            d_max: 5.0,
            num_bins: 1,
        };
        let edges = lid_edges(&spec);
        assert_eq!(edges.edges(), &[0.0, 5.0]);
    }

    #[test]
    fn two_bin_hand_edges() {
        let spec = BinSpec {
            d_min: 0.0,
            d_max: 3.0,
            num_bins: 2,
        };
        assert_eq!(lid_delta(&spec), 1.0);
        assert_eq!(lid_edges(&spec).edges(), &[0.0, 1.0, 3.0]);
    }

    #[test]
    fn continuous_boundaries() {
        let spec = kitti_bins();
        let lo = lid_continuous(spec.d_min, &spec);
        assert_eq!(lo.value, 0.0);
        assert!(!lo.out_of_range);
        let hi = lid_continuous(spec.d_max, &spec);
        assert!((hi.value - 80.0).abs() < 1e-9);
        assert!(!hi.out_of_range);
        assert_eq!(lid_index(spec.d_max, &spec).value, 79);
    }

    #[test]
    fn clamping_flags() {
        let spec = kitti_bins();
        let below = lid_index(1.0, &spec);
        assert_eq!(below.value, 0);
        assert!(below.out_of_range);
        let above = lid_index(100.0, &spec);
        assert_eq!(above.value, 79);
        assert!(above.out_of_range);
    }

    #[test]
    fn first_bin_interior() {
        let spec = kitti_bins();
        let edges = lid_edges(&spec);
        let z = edges.edges()[1] - 1e-9;
        assert_eq!(lid_index(z, &spec).value, 0);
    }

    #[test]
    fn index_matches_edge_scan() {
        let spec = kitti_bins();
        let edges = lid_edges(&spec);
        // Deterministic low-discrepancy sweep of 10_000 samples.
        let n = 10_000;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            let z = spec.d_min + t * (spec.d_max - spec.d_min);
            let got = lid_index(z, &spec).value;
            let want = edge_scan_index(z, &edges);
            assert_eq!(got, want, "z = {z}");
        }
    }

    #[test]
    fn round_trip_identity() {
        let spec = kitti_bins();
        for i in 0..1000 {
            let z = spec.d_min + (i as f64 / 999.0) * (spec.d_max - spec.d_min);
            let back = lid_depth_of(lid_continuous(z, &spec).value, &spec).unwrap();
            assert!((back - z).abs() <= 1e-6 * z.abs().max(1.0), "z = {z}");
        }
        assert_eq!(lid_depth_of(0.0, &spec).unwrap(), spec.d_min);
        assert!((lid_depth_of(80.0, &spec).unwrap() - spec.d_max).abs() < 1e-9);
        assert!(matches!(
            lid_depth_of(-0.1, &spec),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            lid_depth_of(80.1, &spec),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn widths_grow_by_delta() {
        let spec = kitti_bins();
        let delta = lid_delta(&spec);
        let edges = lid_edges(&spec);
        for i in 0..spec.num_bins - 1 {
            let growth = edges.width(i + 1) - edges.width(i);
            assert!((growth - delta).abs() < 1e-9, "bin {i}");
        }
    }
}
