use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments, out-of-range indices, bad configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value fell outside the domain a kernel or predictor is defined on.
    #[error("domain violation: {0}")]
    Domain(String),

    /// The null-space design matrix does not have full column rank.
    #[error("null-space basis is rank deficient (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    /// A factorization or optimization could not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for failures caused by the data or configuration rather than by
    /// the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Domain(_))
    }
}
