//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("infeasible occlusion pattern: {0}")]
    InfeasiblePattern(String),

    #[error("silent signal: {0}")]
    SilentSignal(String),

    #[error("empty activity mask")]
    EmptyMask,

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },

    #[error("numerical failure in {op}: {detail}")]
    Numerical { op: &'static str, detail: String },

    #[error("beamformer divergence at frame {frame}, bin {bin} (|w| = {norm:.3e})")]
    Divergence { frame: usize, bin: usize, norm: f64 },

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
