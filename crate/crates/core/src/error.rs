use thiserror::Error;

use crate::topology::CameraId;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent topology / model configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown camera id {0}")]
    UnknownCamera(CameraId),

    #[error("border {border} out of range for {what} (size {size})")]
    BorderOutOfRange { what: &'static str, border: usize, size: usize },

    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("inconsistent topology: {0}")]
    InconsistentTopology(String),

    #[error("degenerate posterior: no admissible (label, predecessor) cell")]
    DegeneratePosterior,

    #[error("untrained camera pair ({0}, {1})")]
    UntrainedPair(CameraId, CameraId),

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("empty belief")]
    EmptyBelief,

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
