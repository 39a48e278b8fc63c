use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("{0} is outside its domain")]
    Domain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Two routes to the same quantity disagree; indicates a transcription bug.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("degenerate denominator |Q(i omega)|^2 = {denominator:e} at omega = {omega}")]
    DegenerateDenominator { omega: f64, denominator: f64 },

    #[error("solution diverged after t = {last_valid_time}")]
    Divergence { last_valid_time: f64 },

    #[error("component {component} fell to {value:e} at t = {time}")]
    InvariantViolation {
        time: f64,
        component: &'static str,
        value: f64,
    },

    #[error("t = {t} outside trajectory domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
