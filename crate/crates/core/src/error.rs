//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by parsing, validation, and the geometric pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A grid range is not an integer multiple of the voxel size.
    #[error("axis {axis}: range [{min}, {max}] is not an integer multiple of voxel size {voxel_size}")]
    NonCommensurateRange {
        axis: char,
        min: f64,
        max: f64,
        voxel_size: f64,
    },

    /// Tensor blob did not start with the `DTF1` magic.
    #[error("bad tensor blob magic {found:?}, expected \"DTF1\"")]
    BadMagic { found: [u8; 4] },

    /// Tensor blob ended before the declared payload was complete.
    #[error("truncated tensor blob: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    /// Declared tensor dims overflow addressable memory.
    #[error("tensor dims {dims:?} overflow")]
    DimOverflow { dims: Vec<u32> },

    /// Shapes of two inputs disagree.
    #[error("dimension mismatch: {context}")]
    DimMismatch { context: String },

    /// An input value was NaN or infinite where a finite value is required.
    #[error("non-finite input: {context}")]
    NonFiniteInput { context: String },

    /// A scalar argument fell outside its documented domain.
    #[error("out of range: {context}")]
    OutOfRange { context: String },

    /// A field value fell outside its required interval.
    #[error("range error: {context}")]
    RangeError { context: String },

    /// Ray origin and endpoint coincide.
    #[error("degenerate ray: origin equals endpoint")]
    DegenerateRay,

    /// Box shrink scale outside (0, 1].
    #[error("bad shrink scale {scale}, expected a value in (0, 1]")]
    BadScale { scale: f64 },

    /// Two label grids were built over different grid specs.
    #[error("grid spec mismatch between label grids")]
    SpecMismatch,

    /// Calibration matrix is not invertible.
    #[error("singular calibration matrix")]
    SingularCalibration,

    /// A required key is absent from a calibration or config file.
    #[error("missing key `{key}`")]
    MissingKey { key: String },

    /// A token could not be parsed as a number.
    #[error("malformed number `{token}` in {context}")]
    MalformedNumber { token: String, context: String },

    /// A calibration line carried the wrong number of values.
    #[error("key `{key}` has {found} values, expected {expected}")]
    WrongArity {
        key: String,
        expected: usize,
        found: usize,
    },

    /// A label line carried the wrong number of fields.
    #[error("label line {line} has {found} fields, expected {expected}")]
    WrongFieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    /// Velodyne binary length is not a multiple of the record size.
    #[error("truncated velodyne record: {length} bytes is not a multiple of 16")]
    TruncatedRecord { length: usize },

    /// Depth PNG is not 16-bit.
    #[error("wrong PNG bit depth: {found}, expected 16-bit")]
    WrongBitDepth { found: String },

    /// Depth PNG is not single-channel grayscale.
    #[error("wrong PNG channel count: {found}, expected single-channel grayscale")]
    WrongChannelCount { found: String },

    /// Requested slice index exceeds the grid extent.
    #[error("slice {index} out of range on axis {axis} (size {size})")]
    SliceOutOfRange {
        axis: char,
        index: usize,
        size: usize,
    },

    /// Constructor or config validation failure.
    #[error("invalid argument: {context}")]
    InvalidArgument { context: String },

    /// PNG container could not be decoded or encoded.
    #[error("png error: {0}")]
    Png(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim_mismatch(context: impl Into<String>) -> Self {
        Error::DimMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn invalid(context: impl Into<String>) -> Self {
        Error::InvalidArgument {
            context: context.into(),
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFiniteInput {
            context: context.into(),
        }
    }
}
