//! Depth thickness field toolkit: per-pixel depth representations over LID
//! bins, frustum-to-voxel lifting, occupancy gating, and tri-state occupancy
//! label generation from point clouds and oriented 3D boxes, with
//! KITTI-format ingestion.
//!
//! The world frame throughout is the LiDAR/ego frame (x forward, y left,
//! z up). Every type is immutable after construction and safe to share
//! across threads; all operations are deterministic — identical inputs give
//! bit-identical outputs regardless of thread count.

pub mod binning;
pub mod config;
pub mod error;
pub mod kitti;
pub mod lifting;
pub mod occupancy;
pub mod repr;
pub mod tensor;
pub mod types;
pub mod viz;

pub use error::{Error, Result};
pub use tensor::{Tensor, BLOB_MAGIC};
pub use types::{
    BinSpec, CameraCalibration, DepthMap, DownsampleMode, FeaturePlane, FrustumGrid, GridSpec,
    PixelProjection, VoxelGrid, DEPTH_SENTINEL,
};
