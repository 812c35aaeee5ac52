use thiserror::Error;

/// Errors surfaced by the simulator, predictors and orchestrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid decision: {0}")]
    InvalidDecision(String),

    #[error("insufficient history: need at least {needed} samples, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("empty metric stream")]
    EmptyStream,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
