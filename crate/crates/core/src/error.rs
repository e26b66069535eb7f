use thiserror::Error;

use crate::lp::LpError;
use crate::model::MixedPolicy;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition of an operation was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// An oracle-based solver hit its iteration cap. The best iterate found so
    /// far is attached together with the residual optimality gap.
    #[error("solver stopped after {calls} oracle calls with residual gap {gap:.3e}")]
    NonConvergence {
        best: MixedPolicy,
        value: f64,
        gap: f64,
        calls: u64,
    },

    /// Coordinate descent performed more update steps than its proven bound.
    #[error("coordinate descent used {steps} update steps, bound is {bound}")]
    IterationBound { steps: usize, bound: usize },

    #[error("linear program: {0}")]
    Lp(#[from] LpError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
