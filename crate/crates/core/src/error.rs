use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("rank {rank} out of range 1..={max} in {context}")]
    RankOutOfRange {
        context: &'static str,
        rank: usize,
        max: usize,
    },

    #[error("{context}: matrix has numerical rank 0")]
    ZeroRank { context: &'static str },

    #[error("non-finite entry at row {row}, column {col} in {context}")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inconsistent inputs: {what} (relative residual {residual:.3e})")]
    Inconsistent { what: String, residual: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("malformed matrix data: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures that come from the numbers rather than from the caller's
    /// inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroRank { .. } | Error::NoConvergence(_) | Error::RankOutOfRange { .. }
        )
    }

    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
