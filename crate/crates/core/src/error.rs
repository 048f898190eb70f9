//! Error type shared by every module in the core crate.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A band-count (B) disagreement between two spectral objects.
    BandMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// An endmember-count (K) disagreement.
    EndmemberMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// Softmax temperature must be strictly positive.
    NonPositiveTau { tau: f64 },
    /// A value that must be finite was NaN or infinite.
    NonFinite { context: &'static str },
    /// A value escaped its required range.
    OutOfRange {
        context: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    /// An index addressed past the end of a collection.
    IndexOutOfBounds {
        context: &'static str,
        index: usize,
        len: usize,
    },
    /// Input data has too little numerical rank for the requested extraction.
    RankDeficient { observed: usize, required: usize },
    /// A ray direction was not unit length.
    NonUnitDirection { norm: f64 },
    /// A ray with near >= far.
    DegenerateRay { near: f64, far: f64 },
    /// A stored field parameter was NaN; names the offending voxel.
    NanParameter { voxel: usize },
    /// Backward pass requested without a retained per-sample record.
    MissingSampleRecord,
    /// Training dataset holds no views.
    EmptyDataset,
    /// Training loss became NaN; reports where and at which learning rate.
    NanLoss { iteration: usize, lr: f64 },
    /// Camera pose whose rotation block is not orthonormal.
    NonOrthonormalRotation { deviation: f64 },
    /// Catch-all for argument validation with a formatted message.
    Invalid { context: &'static str, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BandMismatch {
                context,
                expected,
                actual,
            } => write!(f, "{context}: band count mismatch, expected B={expected}, got B={actual}"),
            Error::EndmemberMismatch {
                context,
                expected,
                actual,
            } => write!(
                f,
                "{context}: endmember count mismatch, expected K={expected}, got K={actual}"
            ),
            Error::NonPositiveTau { tau } => {
                write!(f, "softmax temperature must be > 0, got {tau}")
            }
            Error::NonFinite { context } => write!(f, "{context}: value is not finite"),
            Error::OutOfRange {
                context,
                value,
                min,
                max,
            } => write!(f, "{context}: value {value} outside [{min}, {max}]"),
            Error::IndexOutOfBounds {
                context,
                index,
                len,
            } => write!(f, "{context}: index {index} out of bounds for length {len}"),
            Error::RankDeficient { observed, required } => write!(
                f,
                "data is rank deficient: numerical rank {observed} < required {required}"
            ),
            Error::NonUnitDirection { norm } => {
                write!(f, "direction must be unit length, got norm {norm}")
            }
            Error::DegenerateRay { near, far } => {
                write!(f, "degenerate ray: near {near} >= far {far}")
            }
            Error::NanParameter { voxel } => {
                write!(f, "field parameter at voxel {voxel} is NaN")
            }
            Error::MissingSampleRecord => {
                write!(f, "backward pass requires a forward march with retained samples")
            }
            Error::EmptyDataset => write!(f, "dataset contains no views"),
            Error::NanLoss { iteration, lr } => {
                write!(f, "loss became NaN at iteration {iteration} (lr {lr:.6e})")
            }
            Error::NonOrthonormalRotation { deviation } => write!(
                f,
                "rotation block is not orthonormal (max |R^T R - I| = {deviation:.3e})"
            ),
            Error::Invalid { context, detail } => write!(f, "{context}: {detail}"),
        }
    }
}

impl core::error::Error for Error {}
