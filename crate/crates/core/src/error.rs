use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error(
        "partial {index} at {frequency:.3} Hz is at or above the Nyquist frequency {nyquist:.3} Hz"
    )]
    AboveNyquist {
        index: usize,
        frequency: f64,
        nyquist: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal has {actual} samples but at least {required} are required")]
    SignalTooShort { required: usize, actual: usize },

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("vertex {vertex} has only {available} finite-distance neighbours, fewer than K = {k}")]
    InsufficientNeighbors {
        vertex: usize,
        available: usize,
        k: usize,
    },

    #[error("graph has {n_vertices} vertices, above the oracle size guard of {limit}")]
    OracleSizeGuard { n_vertices: usize, limit: usize },

    #[error("neighbour graph is disconnected ({} components); restrict to one component or raise K", components.len())]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("matrix is not symmetric: |M[{row},{col}] - M[{col},{row}]| = {deviation:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported WAV encoding ({0})")]
    UnsupportedWav(String),

    #[error("malformed WAV file {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("no corpus entries left after filtering ({0})")]
    EmptyCorpus(String),

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
