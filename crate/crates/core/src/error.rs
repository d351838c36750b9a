use std::path::PathBuf;

/// Errors produced by the channel builders, the solvers and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate geometry: user at {distance:.3e} m from element {element}")]
    DegenerateGeometry { element: usize, distance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: pivot {pivot:.3e} at row {row} below threshold {threshold:.3e}")]
    SingularMatrix {
        row: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("power bisection failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("degenerate retraction: entry {index} has magnitude {magnitude:.3e}")]
    DegenerateRetraction { index: usize, magnitude: f64 },

    #[error("wrong architecture: expected {expected}, got {found}")]
    WrongArchitecture {
        expected: &'static str,
        found: String,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error: field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
