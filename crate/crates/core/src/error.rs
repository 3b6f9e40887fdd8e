use thiserror::Error;

/// Errors raised by grid construction, distribution handling, and the solver.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("negative density {value:e} at node {node} (t = {time}, dt = {dt}); retry with a smaller time step")]
    Negativity {
        node: usize,
        value: f64,
        time: f64,
        dt: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("corpus exhausted: {admitted} of {requested} admissible draws after {attempts} attempts")]
    CorpusExhausted {
        requested: usize,
        admitted: usize,
        attempts: usize,
    },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
