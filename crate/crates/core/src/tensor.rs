//! Portable binary tensor container.
//!
//! On-disk layout: 4 ASCII bytes `DTF1`, an unsigned 32-bit little-endian
//! rank, `rank` unsigned 32-bit little-endian dims, then the row-major
//! payload as little-endian IEEE-754 f32. A rank-0 blob is a scalar with a
//! 4-byte payload. Write followed by read is bit-exact.

use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const BLOB_MAGIC: [u8; 4] = *b"DTF1";

/// Dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let expected = element_count(&dims)?;
        if data.len() != expected {
            return Err(Error::dim_mismatch(format!(
                "tensor dims {:?} require {} elements, got {}",
                dims,
                expected,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<u32>) -> Result<Self> {
        let n = element_count(&dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; n],
        })
    }

    pub fn scalar(value: f32) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![value],
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn element_count(&self) -> usize {
        self.data.len()
    }

    /// Serialize into a writer. Rejects non-finite values up front so a blob
    /// on disk always satisfies the format's finiteness contract.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        if let Some(bad) = self.data.iter().find(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("tensor payload contains {bad}")));
        }
        w.write_all(&BLOB_MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for &v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact_or_truncated(r, &mut magic)?;
        if magic != BLOB_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let mut word = [0u8; 4];
        read_exact_or_truncated(r, &mut word)?;
        let rank = u32::from_le_bytes(word) as usize;
        let mut dims = Vec::with_capacity(rank.min(64));
        for _ in 0..rank {
            read_exact_or_truncated(r, &mut word)?;
            dims.push(u32::from_le_bytes(word));
        }
        let n = element_count(&dims)?;
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::DimOverflow { dims: dims.clone() })?;
        // Bounded read: a bogus huge dim claim on a short stream fails with
        // TruncatedPayload instead of attempting the full allocation.
        let mut payload = Vec::new();
        r.take(bytes as u64).read_to_end(&mut payload)?;
        if payload.len() != bytes {
            return Err(Error::TruncatedPayload {
                expected: bytes,
                found: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

fn element_count(dims: &[u32]) -> Result<usize> {
    let mut n: usize = 1;
    for &d in dims {
        n = n
            .checked_mul(d as usize)
            .ok_or_else(|| Error::DimOverflow {
                dims: dims.to_vec(),
            })?;
    }
    n.checked_mul(4).ok_or_else(|| Error::DimOverflow {
        dims: dims.to_vec(),
    })?;
    Ok(n)
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::TruncatedPayload {
                    expected: buf.len(),
                    found: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
