use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("integration failed after {subdivisions} subdivisions (best estimate {estimate}, error {error_estimate})")]
    Integration {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("singular matrix (near-null direction {direction:?})")]
    Singular { direction: Vec<f64> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Data(String),

    /// `row` counts data rows from 1 (0 is the header); `column` counts
    /// from 1 (0 when the problem is not tied to a column).
    #[error("{path}: row {row}, column {column}: {message}")]
    Csv {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
