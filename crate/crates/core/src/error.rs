use thiserror::Error;

/// Errors raised by the numerical core, the controllers and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value passed to {op}")]
    NonFinite { op: &'static str },

    #[error("{0}")]
    Domain(String),

    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("vertex {index} is not Hurwitz (max real eigenvalue part {margin:e}); no common Lyapunov matrix exists")]
    NotHurwitz { index: usize, margin: f64 },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("integration error at t = {t}: derivative component {component} is not finite")]
    Integration { t: f64, component: usize },

    #[error("simulation diverged at t = {t}: state norm {norm:e} exceeds limit")]
    Diverged {
        t: f64,
        norm: f64,
        last_row: Vec<f64>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(op: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
