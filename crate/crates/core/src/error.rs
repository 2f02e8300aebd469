use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numerical failure: {msg} (last residual {residual:e})")]
    Numerical { msg: String, residual: f64 },

    #[error("population extinct at step {step} (t = {time})")]
    Extinction { step: u64, time: f64 },

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical { msg: msg.into(), residual }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
