use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid functions live on different domains")]
    DomainMismatch,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("inadmissible pair: coupling integral vanishes (u·v ≡ 0)")]
    Inadmissible,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        trace: Vec<f64>,
    },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
