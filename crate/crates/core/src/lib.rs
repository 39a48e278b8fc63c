//! Equilibria, linear stability, delay-induced stability switches and
//! numerical integration for a delayed model of blood-cell production with
//! quiescent stem cells (Q), mature cells (M) and a growth factor (E).

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dde;
pub mod equilibria;
pub mod error;
pub mod linearization;
pub mod model;
pub mod poly;
pub mod switch;

pub use dde::{
    classify_asymptotics, detect_period, integrate, Asymptotics, History, IntegrateOptions,
    PeriodEstimate, Trajectory,
};
pub use equilibria::{
    delay_grid, positive_equilibrium, tau_max, trivial_equilibrium, Equilibrium, EquilibriumKind,
};
pub use error::{Error, Result};
pub use linearization::{char_coeffs, linearize, routh_hurwitz_tau0, CharCoeffs, LinCoeffs};
pub use model::{
    rhs, validate, Component, HillRates, ModelParams, RateFunctions, SystemState, Violation,
};
pub use switch::{scan, Direction, ScanResult, Stability, SwitchReport};
