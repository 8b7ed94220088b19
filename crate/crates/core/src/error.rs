use thiserror::Error;

use crate::solvers::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),

    /// The inner loop of an implicit scheme hit its iteration cap.
    #[error("inner loop did not converge: {message}")]
    Convergence {
        message: String,
        partial: Box<Trajectory>,
    },

    /// Iterates left the region `‖z‖ ≤ 1e12` or became non-finite.
    #[error("iterates diverged at outer iteration {iteration} (norm {norm:e})")]
    Divergence {
        iteration: usize,
        norm: f64,
        partial: Box<Trajectory>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Partial trajectory carried by run-aborting errors.
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            Error::Convergence { partial, .. } | Error::Divergence { partial, .. } => Some(partial),
            _ => None,
        }
    }
}
