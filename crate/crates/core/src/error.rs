use std::path::PathBuf;

/// Errors raised anywhere in the reduction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigenpair {0} did not converge; increase the Krylov dimension")]
    NonConvergence(usize),

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    CgNonConvergence { iterations: usize, residual: f64 },

    #[error("dense eigensolver limited to n <= {limit}, got {n}")]
    TooLarge { n: usize, limit: usize },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("posterior system is singular even after regularization")]
    SingularSystem,

    #[error(
        "covariance lost positive semi-definiteness at step {step} (min eigenvalue {min_eig:.3e})"
    )]
    NotPsd { step: usize, min_eig: f64 },

    #[error("reference trajectory has zero norm")]
    ZeroTruth,

    #[error("CFL number {0:.3} exceeds 1")]
    CflViolation(f64),

    #[error("non-finite value produced")]
    NonFinite,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed field dump: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
