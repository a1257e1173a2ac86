use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The density of the product diverges at the origin.
    #[error("density is singular at x = 0")]
    Singular,

    #[error("non-finite intermediate value: {0}")]
    NonFinite(String),

    #[error("result overflows f64: {0}")]
    Overflow(String),

    #[error("could not bracket the root: {0}")]
    Bracket(String),

    #[error("order-statistic block too small: need {needed} values, have {available}")]
    InsufficientBlock { needed: usize, available: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("method `{method}` does not support {quantity}")]
    Unsupported { method: String, quantity: String },
}

pub type Result<T> = std::result::Result<T, Error>;
