use thiserror::Error;

use crate::spectral::Parity;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QstError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("frequency {omega} collides with channel energy {energy}")]
    PoleCollision { omega: f64, energy: f64 },

    #[error("no sign change of D{parity} on ({lo}, {hi})")]
    BracketFailure { parity: Parity, lo: f64, hi: f64 },

    #[error("residue weights sum to {sum}, expected 1")]
    Completeness { sum: f64 },

    #[error("numerical failure for {context}: {reason}")]
    Numerical { context: String, reason: String },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("empty trajectory")]
    EmptyTrajectory,
}

pub type Result<T> = std::result::Result<T, QstError>;
