//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnisoError {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape does not fit inside the grid with the required margin")]
    ShapeOutOfBounds,

    #[error("mask is empty")]
    EmptyMask,

    #[error("support of the ratio image is empty")]
    EmptySupport,

    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),

    #[error("trajectory time steps are not uniform")]
    NonUniformDt,

    #[error("dual field violates the unit-ball constraint: max |xi| = {0}")]
    DualConstraintViolation(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, AnisoError>;
