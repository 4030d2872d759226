use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{model} requires an even number of sites, got N={n}")]
    OddSize { model: &'static str, n: usize },

    #[error("configuration outside the model alphabet: {0}")]
    Alphabet(String),

    #[error("operation `{op}` is not defined for the {model} model")]
    WrongModel { op: &'static str, model: &'static str },

    #[error("{what} too large: {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("kernel is not reversible: {0}")]
    NotReversible(String),

    #[error("state sets do not match: {0}")]
    StateMismatch(String),

    #[error("partition block {0} is empty")]
    EmptyBlock(usize),

    #[error("bound hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("reducible chain: {0}")]
    Reducible(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("trace too short: {len} samples (need at least {needed})")]
    TraceTooShort { len: usize, needed: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
