use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("subsystem {index} out of range for {parties} parties")]
    InvalidSubsystem { index: usize, parties: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid separability structure: {0}")]
    InvalidStructure(String),

    #[error("amplitude vector has vanishing norm {0:e}")]
    Renormalization(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("loss became NaN at batch {batch}")]
    NanLoss { batch: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
