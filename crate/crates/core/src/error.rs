use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no contours")]
    NoContours,

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("invalid plane: {0}")]
    InvalidPlane(String),

    #[error("mesh slice produced open chains; open endpoints: {endpoints:?}")]
    OpenContours { endpoints: Vec<[f64; 3]> },

    #[error("empty mesh")]
    EmptyMesh,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parity failure in voxel column ({i}, {j}): odd number of surface crossings")]
    ParityFailure { i: usize, j: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("bad magic")]
    BadMagic,

    #[error("version mismatch: file has version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("shape mismatch in field `{field}`: file has {found}, expected {expected}")]
    ShapeMismatch {
        field: &'static str,
        found: u64,
        expected: u64,
    },

    #[error("non-finite values in tensor `{0}`")]
    NonFiniteParameter(String),

    #[error("non-finite loss (on={on}, off={off}, eik={eik}, min={min})")]
    NonFiniteLoss { on: f64, off: f64, eik: f64, min: f64 },

    #[error("geometric initialization failed: max deviation from sphere {max_deviation:.4} > 0.1; try a different seed")]
    InitVerification { max_deviation: f64 },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("need at least 10 slices for a held-out split, got {0}")]
    TooFewSlices(usize),

    #[error("{0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
