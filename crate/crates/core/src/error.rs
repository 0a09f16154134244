//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit parameters: {0}")]
    InvalidParams(String),

    #[error("invalid ODE: {0}")]
    InvalidOde(String),

    #[error("netlist line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("netlist: {0}")]
    Netlist(String),

    #[error("causal conflict: {0}")]
    Causality(String),

    #[error("state space: {0}")]
    StateSpace(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative order {order} out of range (max {max})")]
    DerivativeOrder { order: usize, max: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("parameter {name} left the positive domain (value {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("missing input: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence(_) => 3,
            Error::Syntax { .. } | Error::Netlist(_) | Error::Causality(_) | Error::StateSpace(_) => 4,
            Error::InvalidParams(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        }
    }
}
