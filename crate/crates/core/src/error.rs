use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed something the operation cannot accept (bad rate, bad
    /// region kind, unknown id, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A problem or measure broke one of its declared contracts (bound below
    /// the density ratio, non-partitioning split, support mismatch, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A sampler exceeded its iteration cap without terminating; almost
    /// always a malformed split/bound contract rather than bad luck.
    #[error("no progress after {iterations} iterations: {context}")]
    ProgressFailure { iterations: u64, context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}
