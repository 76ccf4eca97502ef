use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex index {index} out of range for graph with {n} vertices")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("edge ({i}, {j}) has negative weight {weight}")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("edge ({i}, {j}) listed twice with weights {first} and {second}")]
    ConflictingDuplicateEdge {
        i: usize,
        j: usize,
        first: f64,
        second: f64,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("distance matrix is not symmetric at ({i}, {j})")]
    AsymmetricDistance { i: usize, j: usize },

    #[error("distance matrix has negative or non-finite entry at ({i}, {j})")]
    NegativeDistance { i: usize, j: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid band size k={k} for N={n}")]
    InvalidBand { k: usize, n: usize },

    #[error("eigensolver did not converge (achieved residual {residual:e})")]
    ConvergenceFailure { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("vertex {0} is already selected")]
    AlreadySelected(usize),

    #[error("all vertices have been selected")]
    Exhausted,

    #[error("vertex {got} is not the most recently selected vertex (expected {expected:?})")]
    NotMostRecent { expected: Option<usize>, got: usize },

    #[error("oracle failed at vertex {vertex}: {reason}")]
    OracleFailure { vertex: usize, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("spectrum cache does not match the Laplacian (hash {found}, expected {expected})")]
    CacheMismatch { expected: String, found: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn dims(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::ConvergenceFailure { .. } | Error::NonFinite(_))
    }
}
