use thiserror::Error;

/// Errors raised by model construction, numerics and file parsing.
#[derive(Debug, Error)]
pub enum NecError {
    #[error("{what} = {value} is outside the supported range [1, {cap}]")]
    Bounds {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot delete a node from a single-node graph")]
    InvalidDeletion,

    #[error("invalid ERNEC parameters: {0}")]
    Params(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("calibration failed for node count {node_count}: target dwell {target} must exceed tau = {tau}")]
    Calibration {
        node_count: usize,
        target: f64,
        tau: f64,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported header {found:?}; expected {expected:?}")]
    Version { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NecError>;

impl NecError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        NecError::Argument(msg.into())
    }
}
