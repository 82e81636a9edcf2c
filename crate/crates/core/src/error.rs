use thiserror::Error;

/// Errors raised by mesh handling, assembly and time integration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("element {element} has non-positive orientation (det = {det:e})")]
    Orientation { element: usize, det: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("vertex block {vertex} is not positive definite")]
    Degenerate { vertex: usize },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("solution blew up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(expected: impl ToString, actual: impl ToString) -> Error {
    Error::Shape {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
