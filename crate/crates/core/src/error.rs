use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("geometry violation: {0}")]
    Geometry(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("prox did not converge after {iters} iterations (residual {residual:e})")]
    Convergence {
        iters: usize,
        residual: f64,
        best: Vec<f64>,
    },
    #[error("certificate violation: {0}")]
    Certificate(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
