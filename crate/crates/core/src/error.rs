use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    NotSpd { pivot: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n_c = {requested} exceeds the image dimension {available} of the local operator")]
    CoarseDimension { requested: usize, available: usize },

    #[error("input basis is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("coarse operator is numerically singular; offending subdomains {subdomains:?}")]
    SingularCoarse { subdomains: Vec<usize> },

    #[error("direction p^T A p = {curvature:e} <= 0 at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("dense computation requested for n = {n} above the cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("subdomain {subdomain}: {message}")]
    Subdomain { subdomain: usize, message: String },

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            got,
        }
    }

    /// True for failures caused by bad inputs (configs, files, sizes) rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::IndexOutOfRange { .. }
                | Error::InvalidParameter(_)
                | Error::CoarseDimension { .. }
                | Error::Subdomain { .. }
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::DenseCapExceeded { .. }
        )
    }
}
