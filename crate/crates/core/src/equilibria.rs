//! Steady states: the trivial equilibrium `(0, 0, f(0)/k)`, the existence
//! threshold `τ_max`, and the positive equilibrium `(Q*, M*, E*)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ensure_valid, HillRates, ModelParams, RateFunctions, SystemState};

/// Lower end of the initial bracket for `Q*`.
const Q_FLOOR: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 1000;
const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Trivial,
    Positive,
}

impl EquilibriumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumKind::Trivial => "trivial",
            EquilibriumKind::Positive => "positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub state: SystemState,
    /// Delay at which the equilibrium was computed.
    pub tau: f64,
}

impl Equilibrium {
    /// Residual of `(2e^{-γτ}-1)β(Q,E) = δ + g(Q)/Q`; zero for the trivial kind.
    pub fn steady_state_residual<R: RateFunctions>(&self, p: &ModelParams<R>) -> f64 {
        match self.kind {
            EquilibriumKind::Trivial => 0.0,
            EquilibriumKind::Positive => {
                let SystemState { q, e, .. } = self.state;
                p.alpha(self.tau) * p.rates.beta(q, e) - p.delta - p.rates.g(q) / q
            }
        }
    }
}

/// Upper delay bound for the positive equilibrium.
///
/// Returns `None` when `δ + g'(0) ≥ β(0, f(0)/k)`, i.e. no positive equilibrium
/// exists for any delay, and `+∞` when `γ = 0` and it exists for every delay.
pub fn tau_max<R: RateFunctions>(p: &ModelParams<R>) -> Option<f64> {
    let b = p.beta_at_trivial();
    let s = p.delta + p.rates.g_prime(0.0);
    if s >= b {
        return None;
    }
    if p.gamma == 0.0 {
        return Some(f64::INFINITY);
    }
    Some((2.0 * b / (s + b)).ln() / p.gamma)
}

/// `δ + g'(0) < (2e^{-γτ}-1)β(0, f(0)/k)`: the existence condition written
/// directly at a given delay. Equivalent to `τ < τ_max`.
pub fn positive_equilibrium_exists<R: RateFunctions>(p: &ModelParams<R>, tau: f64) -> bool {
    p.delta + p.rates.g_prime(0.0) < p.alpha(tau) * p.beta_at_trivial()
}

pub fn trivial_equilibrium<R: RateFunctions>(p: &ModelParams<R>, tau: f64) -> Equilibrium {
    Equilibrium {
        kind: EquilibriumKind::Trivial,
        state: SystemState::new(0.0, 0.0, p.rates.f(0.0) / p.k),
        tau,
    }
}

/// The unique positive root `Q*` of `(2e^{-γτ}-1)β̃(Q) = δ + g(Q)/Q`, or `None`
/// when `τ ≥ τ_max`.
///
/// The root is bracketed on `[1e-12, 2ʲ]` (doubling from 1) and located by
/// Newton steps safeguarded with bisection.
pub fn positive_equilibrium<R: RateFunctions>(
    p: &ModelParams<R>,
    tau: f64,
) -> Result<Option<Equilibrium>> {
    ensure_valid(p)?;
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("tau = {tau}")));
    }
    match tau_max(p) {
        Some(tm) if tau < tm => {}
        _ => return Ok(None),
    }

    let alpha = p.alpha(tau);
    let residual = |q: f64| alpha * p.beta_tilde(q) - p.delta - p.rates.g(q) / q;
    let slope = |q: f64| {
        let g = p.rates.g(q);
        alpha * p.beta_tilde_prime(q) - (p.rates.g_prime(q) * q - g) / (q * q)
    };
    let tol = 1e-12 * (p.delta + p.rates.g_prime(0.0) + 1.0);

    let mut lo = Q_FLOOR;
    if residual(lo) <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "existence margin at tau = {tau} is below resolution (residual(1e-12) = {:e})",
            residual(lo)
        )));
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while residual(hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "could not bracket Q* at tau = {tau}"
            )));
        }
    }

    let mut q = 0.5 * (lo + hi);
    let mut last_step = hi - lo;
    for _ in 0..MAX_ITERATIONS {
        let r = residual(q);
        if r.abs() < tol {
            return Ok(Some(positive_from_q(p, q, tau)));
        }
        if r > 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            if r.abs() < 1e3 * tol {
                return Ok(Some(positive_from_q(p, q, tau)));
            }
            break;
        }
        let d = slope(q);
        let newton = q - r / d;
        let step = (newton - q).abs();
        q = if d != 0.0 && newton > lo && newton < hi && step < 0.5 * last_step {
            last_step = step;
            newton
        } else {
            last_step = hi - lo;
            0.5 * (lo + hi)
        };
    }
    Err(Error::NumericalFailure(format!(
        "Q* iteration did not converge at tau = {tau}"
    )))
}

fn positive_from_q<R: RateFunctions>(p: &ModelParams<R>, q: f64, tau: f64) -> Equilibrium {
    let m = p.rates.g(q) / p.mu;
    let e = p.rates.f(m) / p.k;
    Equilibrium {
        kind: EquilibriumKind::Positive,
        state: SystemState::new(q, m, e),
        tau,
    }
}

/// Closed-form positive equilibrium for [`HillRates`]:
///
/// ```text
/// Q* = (μ/G) K^{-1/r} ((aβ₀α - (δ+G)(a+k)) / (k(δ+G)))^{1/r}
/// M* = (G/μ) Q*
/// E* = (δ+G) / (β₀α - (δ+G))
/// ```
/// with `α = 2e^{-γτ} - 1`.
pub fn hill_equilibrium_closed_form(p: &ModelParams<HillRates>, tau: f64) -> Result<Equilibrium> {
    let within = matches!(tau_max(p), Some(tm) if tau >= 0.0 && tau < tm);
    if !within {
        return Err(Error::Domain(format!(
            "tau = {tau} (positive equilibrium requires 0 <= tau < tau_max = {:?})",
            tau_max(p)
        )));
    }
    let HillRates { beta0, g_rate, amplitude: a, scale, exponent: r } = p.rates;
    let s = p.delta + g_rate;
    let alpha = p.alpha(tau);
    let inner = (a * beta0 * alpha - s * (a + p.k)) / (p.k * s);
    let q = p.mu / g_rate * scale.powf(-1.0 / r) * inner.powf(1.0 / r);
    Ok(Equilibrium {
        kind: EquilibriumKind::Positive,
        state: SystemState::new(q, g_rate / p.mu * q, s / (beta0 * alpha - s)),
        tau,
    })
}

/// Uniform delay grid `0, h, 2h, …` strictly below `end`.
pub fn delay_grid(end: f64, step: f64) -> Vec<f64> {
    let n = (end / step).ceil() as usize;
    (0..n).map(|i| i as f64 * step).filter(|&t| t < end).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rhs;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> ModelParams {
        ModelParams::reference(0.0)
    }

    #[test]
    fn tau_max_reference_value() {
        let tm = tau_max(&reference()).unwrap();
        assert!((tm - 2.99).abs() < 0.01, "{tm}");
    }

    #[test]
    fn tau_max_doubled_beta0() {
        // Independent transcription of the threshold formula (mpmath).
        let mut p = reference();
        p.rates.beta0 = 1.0;
        assert_relative_eq!(tau_max(&p).unwrap(), 3.221683611647848, max_relative = 1e-13);
        p.rates.beta0 = 0.5;
        assert_relative_eq!(tau_max(&p).unwrap(), 2.988991289528735, max_relative = 1e-13);
    }

    #[test]
    fn tau_max_none_when_threshold_fails() {
        let mut p = reference();
        // choose δ so that δ + G = 2β(0, f(0)/k)
        p.delta = 2.0 * p.beta_at_trivial() - p.rates.g_rate;
        assert_eq!(tau_max(&p), None);
        assert_eq!(positive_equilibrium(&p, 0.0).unwrap(), None);
    }

    #[test]
    fn tau_max_infinite_without_apoptosis() {
        let mut p = reference();
        p.gamma = 0.0;
        assert_eq!(tau_max(&p), Some(f64::INFINITY));
        assert_relative_eq!(p.alpha(50.0), 1.0);
        let a = positive_equilibrium(&p, 0.0).unwrap().unwrap();
        let b = positive_equilibrium(&p, 40.0).unwrap().unwrap();
        assert_relative_eq!(a.state.q, b.state.q, max_relative = 1e-12);
    }

    #[test]
    fn trivial_equilibrium_values() {
        let e = trivial_equilibrium(&reference(), 0.0);
        assert_eq!(e.kind, EquilibriumKind::Trivial);
        assert_eq!((e.state.q, e.state.m), (0.0, 0.0));
        assert!((e.state.e - 2346.4).abs() < 0.05);

        let mut p = reference();
        p.rates.amplitude = 2.8;
        assert_relative_eq!(trivial_equilibrium(&p, 0.0).state.e, 1.0, max_relative = 1e-15);
    }

    #[derive(Debug)]
    struct ConstantFeedback(f64);
    impl RateFunctions for ConstantFeedback {
        fn beta(&self, _: f64, e: f64) -> f64 { e / (1.0 + e) }
        fn beta_dq(&self, _: f64, _: f64) -> f64 { 0.0 }
        fn beta_de(&self, _: f64, e: f64) -> f64 { 1.0 / ((1.0 + e) * (1.0 + e)) }
        fn g(&self, q: f64) -> f64 { 0.1 * q }
        fn g_prime(&self, _: f64) -> f64 { 0.1 }
        fn f(&self, _: f64) -> f64 { self.0 }
        fn f_prime(&self, _: f64) -> f64 { 0.0 }
    }

    #[test]
    fn trivial_equilibrium_constant_feedback() {
        let p = ModelParams { delta: 0.0, gamma: 0.1, tau: 0.0, mu: 1.0, k: 4.0, rates: ConstantFeedback(3.0) };
        assert_eq!(trivial_equilibrium(&p, 0.0).state.e, 0.75);
    }

    #[test]
    fn alpha_at_zero_is_one() {
        assert_eq!(reference().alpha(0.0), 1.0);
    }

    #[test]
    fn positive_equilibrium_matches_closed_form() {
        let p = reference();
        for i in 0..=290 {
            let tau = i as f64 * 0.01;
            let num = positive_equilibrium(&p, tau).unwrap().unwrap();
            let cf = hill_equilibrium_closed_form(&p, tau).unwrap();
            assert_relative_eq!(num.state.q, cf.state.q, max_relative = 1e-9);
            assert_relative_eq!(num.state.m, cf.state.m, max_relative = 1e-9);
            assert_relative_eq!(num.state.e, cf.state.e, max_relative = 1e-9);
            assert!(num.steady_state_residual(&p).abs() < 1e-10);
        }
    }

    #[test]
    fn none_at_and_beyond_tau_max() {
        let p = reference();
        let tm = tau_max(&p).unwrap();
        assert_eq!(positive_equilibrium(&p, tm).unwrap(), None);
        assert_eq!(positive_equilibrium(&p, tm + 0.5).unwrap(), None);
        assert!(matches!(hill_equilibrium_closed_form(&p, tm), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_delay_is_a_domain_error() {
        assert!(matches!(positive_equilibrium(&reference(), -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = reference();
        p.k = 0.0;
        assert!(matches!(positive_equilibrium(&p, 0.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn approaches_trivial_equilibrium_near_tau_max() {
        // The approach is slow, Q* ~ (tau_max - tau)^(1/r); check the trend.
        let p = reference();
        let tm = tau_max(&p).unwrap();
        let trivial = trivial_equilibrium(&p, tm).state;
        let mut last = f64::INFINITY;
        for gap in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
            let e = positive_equilibrium(&p, tm - gap).unwrap().unwrap();
            let dist = (e.state - trivial).norm_inf();
            assert!(dist < last);
            last = dist;
        }
        let near = positive_equilibrium(&p, tm - 1e-10).unwrap().unwrap();
        assert!(near.state.q < 0.11 && (near.state.e - trivial.e).abs() < 0.01);
    }

    #[test]
    fn monotone_in_delay() {
        let p = reference();
        let tm = tau_max(&p).unwrap();
        let eqs: Vec<_> = (0..50)
            .map(|i| positive_equilibrium(&p, tm * i as f64 / 50.0).unwrap().unwrap().state)
            .collect();
        for w in eqs.windows(2) {
            assert!(w[1].q < w[0].q);
            assert!(w[1].m < w[0].m);
            assert!(w[1].e > w[0].e);
        }
    }

    #[test]
    fn consistency_and_annihilation() {
        let p = reference();
        for tau in [0.0, 0.5, 1.4, 2.8, 2.95] {
            let pt = p.with_tau(tau);
            let e = positive_equilibrium(&pt, tau).unwrap().unwrap();
            let s = e.state;
            assert_relative_eq!(s.m, p.rates.g(s.q) / p.mu, max_relative = 1e-12);
            assert_relative_eq!(s.e, p.rates.f(s.m) / p.k, max_relative = 1e-12);
            let d = rhs(s, s, &pt).unwrap();
            assert!(d.norm_inf() < 1e-9 * (1.0 + s.norm_inf()), "{tau}: {d:?}");
        }
    }

    fn random_hill(rng: &mut ChaCha8Rng) -> ModelParams {
        ModelParams {
            delta: rng.gen_range(0.0..0.05),
            gamma: rng.gen_range(0.0..0.5),
            tau: 0.0,
            mu: rng.gen_range(0.005..0.5),
            k: rng.gen_range(0.5..5.0),
            rates: HillRates {
                beta0: rng.gen_range(0.1..2.0),
                g_rate: rng.gen_range(0.005..0.2),
                amplitude: rng.gen_range(10.0..1e4),
                scale: rng.gen_range(0.001..1.0),
                exponent: rng.gen_range(1.5..10.0),
            },
        }
    }

    #[test]
    fn residual_changes_sign_exactly_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let p = random_hill(&mut rng);
            let Some(tm) = tau_max(&p) else { continue };
            let tau = if tm.is_finite() { rng.gen_range(0.0..tm) } else { rng.gen_range(0.0..10.0) };
            let Ok(cf) = hill_equilibrium_closed_form(&p, tau) else { continue };
            let q_hi = 10.0 * cf.state.q;
            let alpha = p.alpha(tau);
            let residual = |q: f64| alpha * p.beta_tilde(q) - p.delta - p.rates.g(q) / q;
            let changes = (1..=2000)
                .map(|i| q_hi * i as f64 / 2000.0)
                .map(residual)
                .collect::<Vec<_>>()
                .windows(2)
                .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
                .count();
            assert_eq!(changes, 1, "{p:?} at tau = {tau}");
            let num = positive_equilibrium(&p, tau).unwrap().unwrap();
            assert_relative_eq!(num.state.q, cf.state.q, max_relative = 1e-8);
            checked += 1;
        }
    }

    #[test]
    fn existence_conditions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let p = random_hill(&mut rng);
            let tau = rng.gen_range(0.0..6.0);
            let by_threshold = matches!(tau_max(&p), Some(tm) if tau < tm);
            let direct = positive_equilibrium_exists(&p, tau);
            if let Some(tm) = tau_max(&p) {
                if (tau - tm).abs() < 1e-9 {
                    continue;
                }
            }
            assert_eq!(by_threshold, direct, "{p:?} tau = {tau}");
        }
    }

    /// β depends on Q as well: β(Q,E) = β₀ E/(1+E) · 1/(1+Qⁿ).
    #[derive(Debug)]
    struct QDependent {
        hill: HillRates,
        n: f64,
    }
    impl RateFunctions for QDependent {
        fn beta(&self, q: f64, e: f64) -> f64 { self.hill.beta(q, e) / (1.0 + q.powf(self.n)) }
        fn beta_dq(&self, q: f64, e: f64) -> f64 {
            let d = 1.0 + q.powf(self.n);
            -self.hill.beta(q, e) * self.n * q.powf(self.n - 1.0) / (d * d)
        }
        fn beta_de(&self, q: f64, e: f64) -> f64 { self.hill.beta_de(q, e) / (1.0 + q.powf(self.n)) }
        fn g(&self, q: f64) -> f64 { self.hill.g(q) }
        fn g_prime(&self, q: f64) -> f64 { self.hill.g_prime(q) }
        fn f(&self, m: f64) -> f64 { self.hill.f(m) }
        fn f_prime(&self, m: f64) -> f64 { self.hill.f_prime(m) }
    }

    #[test]
    fn general_rates_equilibrium() {
        let p = ModelParams { delta: 0.01, gamma: 0.2, tau: 0.0, mu: 0.02, k: 2.8, rates: QDependent { hill: HillRates::DEFAULT, n: 2.0 } };
        let tm = tau_max(&p).unwrap();
        for tau in [0.0, 0.3 * tm, 0.9 * tm] {
            let e = positive_equilibrium(&p, tau).unwrap().unwrap();
            assert!(e.state.q > 0.0);
            assert!(e.steady_state_residual(&p).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_stays_below_end() {
        let g = delay_grid(1.0, 0.25);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75]);
        let g = delay_grid(2.98899, 0.005);
        assert!(*g.last().unwrap() < 2.98899);
        assert_eq!(g.len(), 598);
    }
}
