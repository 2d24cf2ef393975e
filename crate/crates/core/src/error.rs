use alloc::string::String;

/// Failures raised by the models and the simulation loop.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("velocity profile is not finite at r = {radius} m (value {value})")]
    NonFiniteProfile { radius: f64, value: f64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("numerical failure after sample {last_valid}: {what}")]
    Numerical { last_valid: usize, what: &'static str },
    #[error("{0} is undefined")]
    Undefined(&'static str),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
