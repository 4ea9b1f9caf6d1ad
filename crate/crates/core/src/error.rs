//! Crate-wide error type.

/// Errors reported by geometry construction, rendering, metrics and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("arc-length value {value} outside [0, {max}]")]
    ArcLenOutOfRange { value: f64, max: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("rotation is not special orthogonal (|R^T R - I| or |det R - 1| > 1e-9)")]
    NotARotation,

    #[error("camera pose lies outside the mesh")]
    PoseOutsideMesh,

    #[error("trajectory would exit the mesh after wall-clearance clamping")]
    TrajectoryExitsMesh,

    #[error("empty visibility window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("maximal visible set contains no vertices")]
    EmptyMaximalSet,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bad file header: {0}")]
    BadHeader(String),

    #[error("content hash mismatch for {path}")]
    HashMismatch { path: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
