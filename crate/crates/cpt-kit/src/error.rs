//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model evaluation, sampling, fitting and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown route label {0:?}")]
    UnknownRoute(String),

    #[error("unknown covariate label {0:?}")]
    UnknownLabel(String),

    #[error("covariate kind not supported by this model: {0}")]
    CovariateKind(&'static str),

    #[error("effective kernel mass is zero at route {route:?}, time {time}")]
    ZeroEffectiveMass { route: String, time: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("too few observations: n = {n}, need at least {min}")]
    TooFewObservations { n: usize, min: usize },

    #[error("enumeration limit exceeded: {detail}")]
    EnumerationLimit { detail: String },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    #[error("no copies supplied")]
    EmptyCopies,

    #[error("row {line}: {msg}")]
    Row { line: u64, msg: String },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Attach a file path to an I/O error.
    pub fn file(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
