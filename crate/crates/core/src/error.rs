use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported covariance family for this operation: {0}")]
    UnsupportedFamily(&'static str),

    #[error("numerical failure: {message} ({diagnostics})")]
    NumericalFailure { message: String, diagnostics: String },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {final_residual:.3e})")]
    NotConverged {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("state error: {0}")]
    State(String),

    #[error("problem size {n} exceeds the dense oracle guard of {limit}")]
    Size { n: usize, limit: usize },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("truncated raster: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<S: Into<String>>(msg: S) -> Error {
    Error::InvalidArgument(msg.into())
}
