//! Grayscale slice rendering of rank-3/4 tensors as binary PGM (P5) images.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Slicing axis of a rank-3 (X, Y, Z) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    X,
    Y,
    Z,
}

impl SliceAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(SliceAxis::X),
            "y" => Ok(SliceAxis::Y),
            "z" => Ok(SliceAxis::Z),
            other => Err(Error::invalid(format!("axis `{other}`, expected x|y|z"))),
        }
    }

    fn dim_index(self) -> usize {
        match self {
            SliceAxis::X => 0,
            SliceAxis::Y => 1,
            SliceAxis::Z => 2,
        }
    }

    fn letter(self) -> char {
        match self {
            SliceAxis::X => 'x',
            SliceAxis::Y => 'y',
            SliceAxis::Z => 'z',
        }
    }
}

/// A rendered grayscale image: `rows x cols` bytes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Slice a rank-3 or rank-4 tensor into a grayscale image. Rank-4 inputs are
/// first reduced along channels by maximum. Tri-state grids (every value in
/// {-1, 0, 1}) map to {0, 128, 255}; anything else min-max normalizes to
/// [0, 255] (a constant grid renders black).
pub fn render_slice(t: &Tensor, axis: SliceAxis, index: usize) -> Result<GrayImage> {
    let (dims, values): ([usize; 3], Vec<f32>) = match t.dims() {
        [x, y, z] => ([*x as usize, *y as usize, *z as usize], t.data().to_vec()),
        [x, y, z, c] => {
            let (x, y, z, c) = (*x as usize, *y as usize, *z as usize, *c as usize);
            let mut reduced = vec![f32::NEG_INFINITY; x * y * z];
            for (cell, chunk) in t.data().chunks(c).enumerate() {
                reduced[cell] = chunk.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            }
            ([x, y, z], reduced)
        }
        other => {
            return Err(Error::dim_mismatch(format!(
                "viz input must be rank 3 or 4, got dims {other:?}"
            )))
        }
    };

    let a = axis.dim_index();
    if index >= dims[a] {
        return Err(Error::SliceOutOfRange {
            axis: axis.letter(),
            index,
            size: dims[a],
        });
    }

    // Remaining axes in order become (rows, cols).
    let keep: Vec<usize> = (0..3).filter(|&d| d != a).collect();
    let (rows, cols) = (dims[keep[0]], dims[keep[1]]);
    let mut plane = vec![0.0f32; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut idx = [0usize; 3];
            idx[a] = index;
            idx[keep[0]] = r;
            idx[keep[1]] = c;
            plane[r * cols + c] = values[(idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]];
        }
    }

    let tri_state = values.iter().all(|&v| v == -1.0 || v == 0.0 || v == 1.0);
    let pixels = if tri_state {
        plane
            .iter()
            .map(|&v| if v == 1.0 { 255 } else if v == 0.0 { 128 } else { 0 })
            .collect()
    } else {
        let min = plane.iter().cloned().fold(f32::INFINITY, f32::min);
        let max = plane.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        if max > min {
            plane
                .iter()
                .map(|&v| (((v - min) / (max - min)) * 255.0).round() as u8)
                .collect()
        } else {
            vec![0u8; rows * cols]
        }
    };

    Ok(GrayImage { rows, cols, pixels })
}
