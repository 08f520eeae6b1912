use thiserror::Error;

/// Errors produced across the crate. Node indices are 0-based, matching
/// edge-list ids.
#[derive(Error, Debug)]
pub enum Error {
    #[error("node {0} has no outgoing arc (row sum is zero)")]
    ZeroOutDegree(usize),

    #[error("cost and affinity matrices disagree: {0}")]
    ShapeMismatch(String),

    #[error("negative or non-finite entry {value} at ({row}, {col}) in {matrix} matrix")]
    NegativeEntry {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("duplicate arc ({0}, {1})")]
    DuplicateArc(usize, usize),

    #[error("theta must be positive, got {0}")]
    NonPositiveTheta(f64),

    #[error("(I - W) is singular or ill-conditioned (residual {residual:.3e})")]
    SingularSystem { residual: f64 },

    #[error("partition function is zero; no nonzero-length path mass")]
    DegeneratePartition,

    #[error("enumeration depth {requested} exceeds the limit {limit}")]
    DepthLimitExceeded { requested: usize, limit: usize },

    #[error("distance matrix has an infinite entry at ({0}, {1})")]
    InfiniteDistance(usize, usize),

    #[error("graph is not undirected (affinities or costs are asymmetric)")]
    NotUndirected,

    #[error(
        "fixed-point iteration did not converge after {iters} iterations (residual {residual:.3e})"
    )]
    NoConvergence {
        iters: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("class {class} has only {available} labeled nodes, need at least {needed}")]
    InsufficientClassSize {
        class: usize,
        available: usize,
        needed: usize,
    },

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
