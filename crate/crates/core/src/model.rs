//! Model instance: parameters, rate functions and the right-hand side of the
//! delayed quiescent-cell / mature-cell / growth-factor system
//!
//! ```text
//! Q' = -δQ - g(Q) - β(Q,E)Q + 2e^{-γτ} β(Q_τ,E_τ) Q_τ
//! M' = -μM + g(Q)
//! E' = -kE + f(M)
//! ```
//!
//! All rates are per day.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// (Q, M, E) triple. Also used for time derivatives of the state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemState {
    /// Quiescent stem-cell density.
    pub q: f64,
    /// Circulating mature-cell density.
    pub m: f64,
    /// Growth-factor concentration.
    pub e: f64,
}

impl SystemState {
    pub const fn new(q: f64, m: f64, e: f64) -> Self {
        Self { q, m, e }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.m.is_finite() && self.e.is_finite()
    }

    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::Q => self.q,
            Component::M => self.m,
            Component::E => self.e,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.q, self.m, self.e]
    }

    pub fn norm_inf(&self) -> f64 {
        self.q.abs().max(self.m.abs()).max(self.e.abs())
    }

    /// Smallest component together with its name.
    pub fn min_component(&self) -> (Component, f64) {
        Component::ALL
            .into_iter()
            .map(|c| (c, self.get(c)))
            .fold((Component::Q, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    }
}

impl Add for SystemState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.q + o.q, self.m + o.m, self.e + o.e)
    }
}

impl Sub for SystemState {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.q - o.q, self.m - o.m, self.e - o.e)
    }
}

impl Mul<f64> for SystemState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.q * s, self.m * s, self.e * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Q,
    M,
    E,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Q, Component::M, Component::E];

    pub fn name(self) -> &'static str {
        match self {
            Component::Q => "Q",
            Component::M => "M",
            Component::E => "E",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three constitutive functions of the model with their first derivatives.
///
/// Implementations are expected to satisfy:
/// * `g(0) = 0` and `Q ↦ g(Q)/Q` nondecreasing, so `0 ≤ g'(0) ≤ g(Q)/Q ≤ g'(Q)`;
/// * `f` positive and decreasing;
/// * `β` increasing in `E` with `β(Q, 0) = 0`, nonincreasing in `Q`;
/// * `β(Q, f(g(Q)/μ)/k) → 0` as `Q → ∞`.
///
/// Derivatives are supplied analytically; [`check_derivatives`] compares them
/// against central differences.
pub trait RateFunctions: fmt::Debug + Send + Sync {
    fn beta(&self, q: f64, e: f64) -> f64;
    fn beta_dq(&self, q: f64, e: f64) -> f64;
    fn beta_de(&self, q: f64, e: f64) -> f64;
    fn g(&self, q: f64) -> f64;
    fn g_prime(&self, q: f64) -> f64;
    fn f(&self, m: f64) -> f64;
    fn f_prime(&self, m: f64) -> f64;

    /// Family-specific parameter checks.
    fn violations(&self) -> Vec<Violation> {
        Vec::new()
    }
}

/// Hill-type rates: `β(E) = β₀E/(1+E)`, `g(Q) = GQ`, `f(M) = a/(1+K Mʳ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillRates {
    pub beta0: f64,
    /// Linear differentiation rate `G`.
    pub g_rate: f64,
    /// Feedback amplitude `a`.
    pub amplitude: f64,
    /// Feedback scale `K`.
    pub scale: f64,
    /// Feedback exponent `r`.
    pub exponent: f64,
}

impl HillRates {
    pub const DEFAULT: HillRates = HillRates {
        beta0: 0.5,
        g_rate: 0.04,
        amplitude: 6570.0,
        scale: 0.0382,
        exponent: 7.0,
    };
}

impl Default for HillRates {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl RateFunctions for HillRates {
    fn beta(&self, _q: f64, e: f64) -> f64 {
        self.beta0 * e / (1.0 + e)
    }

    fn beta_dq(&self, _q: f64, _e: f64) -> f64 {
        0.0
    }

    fn beta_de(&self, _q: f64, e: f64) -> f64 {
        let d = 1.0 + e;
        self.beta0 / (d * d)
    }

    fn g(&self, q: f64) -> f64 {
        self.g_rate * q
    }

    fn g_prime(&self, _q: f64) -> f64 {
        self.g_rate
    }

    // M is clamped at zero: a non-integer power of a round-off negative is NaN.
    fn f(&self, m: f64) -> f64 {
        self.amplitude / (1.0 + self.scale * m.max(0.0).powf(self.exponent))
    }

    fn f_prime(&self, m: f64) -> f64 {
        let m = m.max(0.0);
        let d = 1.0 + self.scale * m.powf(self.exponent);
        -self.amplitude * self.scale * self.exponent * m.powf(self.exponent - 1.0) / (d * d)
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let positive = [
            ("beta0", self.beta0),
            ("G", self.g_rate),
            ("a", self.amplitude),
            ("K", self.scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Violation::new(name, "> 0", v));
            }
        }
        if !(self.exponent > 1.0 && self.exponent.is_finite()) {
            out.push(Violation::new("r", "> 1", self.exponent));
        }
        out
    }
}

/// A violated structural assumption, e.g. `mu = 0 (required > 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub parameter: String,
    pub requirement: String,
    pub value: f64,
}

impl Violation {
    pub fn new(parameter: &str, requirement: &str, value: f64) -> Self {
        Self {
            parameter: parameter.to_string(),
            requirement: requirement.to_string(),
            value,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} (required {})", self.parameter, self.value, self.requirement)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<R = HillRates> {
    /// Death rate in the G₀ phase.
    pub delta: f64,
    /// Apoptosis rate in the proliferating phase.
    pub gamma: f64,
    /// Cell-cycle duration (the delay).
    pub tau: f64,
    /// Mature-cell degradation rate.
    pub mu: f64,
    /// Growth-factor disappearance rate.
    pub k: f64,
    pub rates: R,
}

impl ModelParams<HillRates> {
    /// The reference parameter set (δ=0.01, γ=0.2, μ=0.02, k=2.8, β₀=0.5,
    /// G=0.04, a=6570, K=0.0382, r=7) at the given delay.
    pub fn reference(tau: f64) -> Self {
        Self {
            delta: 0.01,
            gamma: 0.2,
            tau,
            mu: 0.02,
            k: 2.8,
            rates: HillRates::DEFAULT,
        }
    }
}

impl<R: RateFunctions> ModelParams<R> {
    pub fn with_tau(&self, tau: f64) -> Self
    where
        R: Clone,
    {
        Self {
            tau,
            ..self.clone()
        }
    }

    /// `2e^{-γτ}`, the surviving-and-doubled fraction after one cycle.
    pub fn division_factor(&self, tau: f64) -> f64 {
        2.0 * (-self.gamma * tau).exp()
    }

    /// `α(τ) = 2e^{-γτ} - 1`.
    pub fn alpha(&self, tau: f64) -> f64 {
        self.division_factor(tau) - 1.0
    }

    /// `β(0, f(0)/k)`: the reintroduction rate at the trivial equilibrium.
    pub fn beta_at_trivial(&self) -> f64 {
        self.rates.beta(0.0, self.rates.f(0.0) / self.k)
    }

    /// `β̃(Q) = β(Q, f(g(Q)/μ)/k)`.
    pub fn beta_tilde(&self, q: f64) -> f64 {
        let m = self.rates.g(q) / self.mu;
        self.rates.beta(q, self.rates.f(m) / self.k)
    }

    pub fn beta_tilde_prime(&self, q: f64) -> f64 {
        let r = &self.rates;
        let m = r.g(q) / self.mu;
        let e = r.f(m) / self.k;
        r.beta_dq(q, e) + r.g_prime(q) / (self.k * self.mu) * r.f_prime(m) * r.beta_de(q, e)
    }

    /// Right-hand side without input checks; used by the integrator.
    #[inline]
    pub fn rhs_unchecked(&self, now: SystemState, delayed: SystemState) -> SystemState {
        let r = &self.rates;
        let dq = -self.delta * now.q - r.g(now.q) - r.beta(now.q, now.e) * now.q
            + self.division_factor(self.tau) * r.beta(delayed.q, delayed.e) * delayed.q;
        let dm = -self.mu * now.m + r.g(now.q);
        let de = -self.k * now.e + r.f(now.m);
        SystemState::new(dq, dm, de)
    }
}

/// `(dQ/dt, dM/dt, dE/dt)` given the current and the delayed state.
pub fn rhs<R: RateFunctions>(
    now: SystemState,
    delayed: SystemState,
    p: &ModelParams<R>,
) -> Result<SystemState> {
    if !now.is_finite() {
        return Err(Error::InvalidState(format!("current state {now:?} is not finite")));
    }
    if !delayed.is_finite() {
        return Err(Error::InvalidState(format!("delayed state {delayed:?} is not finite")));
    }
    Ok(p.rhs_unchecked(now, delayed))
}

/// Every violated structural assumption; empty when the instance is admissible.
pub fn validate<R: RateFunctions>(p: &ModelParams<R>) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(p.mu > 0.0 && p.mu.is_finite()) {
        out.push(Violation::new("mu", "> 0", p.mu));
    }
    if !(p.k > 0.0 && p.k.is_finite()) {
        out.push(Violation::new("k", "> 0", p.k));
    }
    for (name, v) in [("delta", p.delta), ("gamma", p.gamma), ("tau", p.tau)] {
        if !(v >= 0.0 && v.is_finite()) {
            out.push(Violation::new(name, ">= 0", v));
        }
    }
    out.extend(p.rates.violations());
    out
}

/// `validate` as a `Result`.
pub fn ensure_valid<R: RateFunctions>(p: &ModelParams<R>) -> Result<()> {
    let v = validate(p);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParams(v))
    }
}

/// Box from which [`check_derivatives`] draws sample points (uniform on `(0, max]`).
#[derive(Debug, Clone, Copy)]
pub struct SampleBox {
    pub q_max: f64,
    pub m_max: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMismatch {
    pub derivative: &'static str,
    pub at: f64,
    pub analytic: f64,
    pub finite_difference: f64,
}

/// Compares each analytic derivative with a central difference at `samples`
/// random points. The step is `1e-6·x`; agreement is required to relative
/// `1e-5`, plus a round-off allowance proportional to `ε|F|/h`.
pub fn check_derivatives<R: RateFunctions, G: Rng>(
    rates: &R,
    bounds: SampleBox,
    samples: usize,
    rng: &mut G,
) -> Vec<DerivativeMismatch> {
    fn compare(
        name: &'static str,
        x: f64,
        analytic: f64,
        func: impl Fn(f64) -> f64,
        out: &mut Vec<DerivativeMismatch>,
    ) {
        let h = 1e-6 * x;
        let (hi, lo) = (func(x + h), func(x - h));
        let fd = (hi - lo) / (2.0 * h);
        let roundoff = 100.0 * f64::EPSILON * (hi.abs() + lo.abs()) / h;
        if (fd - analytic).abs() > 1e-5 * analytic.abs() + roundoff {
            out.push(DerivativeMismatch {
                derivative: name,
                at: x,
                analytic,
                finite_difference: fd,
            });
        }
    }

    let mut out = Vec::new();
    for _ in 0..samples {
        let q = bounds.q_max * rng.gen_range(1e-3..1.0);
        let m = bounds.m_max * rng.gen_range(1e-3..1.0);
        let e = bounds.e_max * rng.gen_range(1e-3..1.0);
        compare("beta_dQ", q, rates.beta_dq(q, e), |x| rates.beta(x, e), &mut out);
        compare("beta_dE", e, rates.beta_de(q, e), |x| rates.beta(q, x), &mut out);
        compare("g_prime", q, rates.g_prime(q), |x| rates.g(x), &mut out);
        compare("f_prime", m, rates.f_prime(m), |x| rates.f(x), &mut out);
    }
    out
}
