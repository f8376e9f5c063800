use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported dimension d={0}; only d=1 is implemented")]
    UnsupportedDimension(usize),

    #[error("invalid frequency: sigma must be nonzero")]
    InvalidFrequency,

    #[error("invalid dilation: y must be nonzero and finite")]
    InvalidDilation,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),

    #[error("prerequisite failure: {0}")]
    PrerequisiteFailure(String),

    #[error("empty family: {0}")]
    EmptyFamily(String),

    #[error("frame bounds undefined for a zero system")]
    UndefinedBounds,

    #[error("total fiber dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
