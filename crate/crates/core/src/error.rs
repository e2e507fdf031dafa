use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("point is not unimodular: max |v_m| deviation {deviation:e}")]
    NotUnimodular { deviation: f64 },

    #[error("retraction hit a zero element at index {index} (|v+xi| = {modulus:e})")]
    ZeroElement { index: usize, modulus: f64 },

    #[error("receive beamformer is zero")]
    ZeroReceive,

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("objective increased at iteration {iteration}: {before} -> {after}")]
    MonotonicityViolation {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("enumeration budget exceeded: {requested} candidates > {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("codesign failed at outer iteration {iteration}: {source}")]
    Outer {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
