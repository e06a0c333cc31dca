use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("G has no local maximizer for level {level} at unit cost {unit_cost}")]
    EmptyLocalMaximizers { level: usize, unit_cost: f64 },

    #[error("effort window for level {level} violates the global-maximizer assumption")]
    InvalidWindow { level: usize },

    #[error("ladder does not satisfy incremental thresholding: {0}")]
    NonCompliantLadder(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
