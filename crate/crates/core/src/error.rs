use std::path::PathBuf;

/// Errors produced by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-integrable kernel: {0}")]
    NonIntegrable(String),

    #[error("kernel unresolved by grid: support {support} is smaller than spacing {spacing}")]
    KernelUnresolved { support: f64, spacing: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite sample at node {index}")]
    NonFinite { index: usize },

    #[error("instability detected at t={time}: sup norm {norm} exceeds bound {bound}")]
    Unstable { time: f64, norm: f64, bound: f64 },

    #[error("time step {dt} exceeds admissible step {limit} ({reason})")]
    StepTooLarge { dt: f64, limit: f64, reason: &'static str },

    #[error("profile degenerated at t={time}: forward difference {min_diff} at node {index}")]
    ProfileDegenerated { time: f64, min_diff: f64, index: usize },

    #[error("initial data not majorizable: {0}")]
    NotMajorizable(String),

    #[error("inadmissible trial function: {0}")]
    InadmissibleTrial(String),

    #[error("assembly too large: {nodes} nodes exceeds limit {limit}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("no oscillation to fit: {0}")]
    NoOscillation(String),

    #[error("time grids mismatched: {0}")]
    TimeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
