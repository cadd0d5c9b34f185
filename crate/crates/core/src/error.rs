use thiserror::Error;

/// Errors raised by network construction, model evaluation, recovery and
/// the experiment runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("probability {value} at ({row}, {col}) lies outside [0, 1]")]
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },

    #[error("label {label} out of range for {k} communities")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("unknown benchmark case {0}; expected 1..=4")]
    UnknownCase(u32),

    #[error("{nodes} nodes cannot be split into {k} communities of size at least two")]
    TooFewNodes { nodes: usize, k: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node-wise probabilities do not group consistently at node {node}")]
    InconsistentGrouping { node: usize },

    #[error("recovered community containing node {node} is a singleton")]
    SingletonCommunity { node: usize },

    #[error("empty input")]
    Empty,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
