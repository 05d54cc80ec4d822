use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A candidate solution pair violates the per-window constant-phase
    /// relation beyond tolerance.
    #[error("block-phase relation violated: spread {spread:.3e} rad exceeds tolerance {tol:.3e}")]
    BlockPhaseViolation { spread: f64, tol: f64 },

    #[error("nonvanishing input required: {0}")]
    ZeroValue(String),

    #[error("illumination weights vanish everywhere (zero estimate)")]
    ZeroWeights,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
