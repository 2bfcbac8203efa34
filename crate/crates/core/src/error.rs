use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },
    #[error("coupling {alpha} exceeds the saddle-node value {alpha_sn}: leading edge is ballistic")]
    BallisticRegime { alpha: f64, alpha_sn: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit did not converge after {iterations} iterations (residual trace {trace:?})")]
    NoConvergence { iterations: usize, trace: Vec<f64> },
}
