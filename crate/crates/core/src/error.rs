use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a documented precondition. The message names the
    /// constraint, e.g. `s must satisfy 0<s<q^-2`.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation failure in {what}: reached {terms} terms with tail bound {bound}")]
    TruncationFailure {
        what: &'static str,
        terms: usize,
        bound: String,
    },

    #[error("pole: denominator parameter #{index} vanishes at term {term}")]
    PoleError { index: usize, term: usize },

    #[error("degenerate recurrence: leading coefficient 1 - s*q^(2n+2) vanishes at n = {n}")]
    DegenerateCoefficient { n: usize },

    #[error("non-positive weight {weight} at support index m = {m}")]
    SignViolation { m: i64, weight: String },

    #[error("incompatible family/measure pair: {0}")]
    IncompatiblePair(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
