use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("matching system is numerically singular (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("transmission probability vanished at step {step} (p = {probability:.3e})")]
    VanishingProbability { step: usize, probability: f64 },

    #[error("wrong model for this solver: expected {expected}")]
    WrongModel { expected: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error came from user input rather than the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Config(_)
                | SimError::InvalidParameter(_)
                | SimError::InvalidDensityMatrix(_)
                | SimError::WrongModel { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
