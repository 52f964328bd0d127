use std::path::PathBuf;

use thiserror::Error;

/// Every failure mode surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point swallowed during step (im would reach 0)")]
    Swallowed,

    #[error("backward composition degenerate at {count} grid times")]
    NumericDegenerate { count: usize },

    #[error("walker exceeded step budget of {budget}")]
    WalkerBudgetExceeded { budget: u64 },

    #[error("target swallowed before upsilon reached {stop_upsilon}")]
    TargetSwallowedEarly { stop_upsilon: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point is dead at t = {t} (swallowed at {swallow_time})")]
    DeadPoint { t: f64, swallow_time: f64 },

    #[error("{unstable} of {total} replicas did not stabilize before t_max")]
    Horizon { unstable: usize, total: usize },

    #[error("trace too coarse: segment of length {segment} exceeds {limit}")]
    Resolution { segment: f64, limit: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },

    #[error("only {accepted} replicas accepted (need {required})")]
    Starved { accepted: usize, required: usize },

    #[error("{path}: line {line}: {reason}")]
    Format { path: PathBuf, line: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Param {
        name,
        reason: reason.into(),
    }
}
