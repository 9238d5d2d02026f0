use alloc::string::String;

use thiserror::Error;

/// Errors produced by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coupling matrix is not Hermitian at ({row},{col})/({col},{row}): deviation {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("eigensolver did not converge for a {size}x{size} matrix (residual {residual:e})")]
    NonConvergence { size: usize, residual: f64 },

    #[error("root bracketing failed on [{lower}, {upper}] with {grid_points} grid points: {detail}")]
    RootBracketing {
        lower: f64,
        upper: f64,
        grid_points: usize,
        detail: String,
    },

    #[error("numerical instability at t = {time}: {detail}; try a smaller dt")]
    NumericalInstability { time: f64, detail: String },

    #[error("Fock cutoff too small: top-level occupation {leakage:e} exceeds {threshold:e}")]
    CutoffTooSmall { leakage: f64, threshold: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
