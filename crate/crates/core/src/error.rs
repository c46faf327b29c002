use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty hypothesis class")]
    EmptyClass,

    #[error("domain index {x} out of range for domain of size {domain_size}")]
    PointOutOfRange { x: usize, domain_size: usize },

    #[error("label vector {index} has length {len}, expected {domain_size}")]
    LabelLength {
        index: usize,
        len: usize,
        domain_size: usize,
    },

    #[error("inconsistent example (x={x}, y={y}) for the current version space")]
    InconsistentExample { x: usize, y: u8 },

    #[error("sequence is not realizable by the class (first conflict at position {position})")]
    NotRealizable { position: usize },

    #[error("empty list")]
    EmptyList,

    #[error("list has length {got}, expected {expected}")]
    ListLength { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sparse-vector budget exhausted")]
    BudgetExhausted,

    #[error("insufficient trials: {got} < {min}")]
    InsufficientTrials { got: usize, min: usize },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
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
