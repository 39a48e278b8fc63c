//! Linearization about an equilibrium and the coefficients of the
//! characteristic equation
//!
//! ```text
//! P(λ,τ) + Q(λ,τ) e^{-λτ} = 0,
//! P = λ³ + a₁λ² + a₂λ + a₃,   Q = a₄λ² + a₅λ + a₆,
//! ```
//!
//! together with `h(z) = z³ + b₁z² + b₂z + b₃`, where `h(ω²) = |P(iω)|² - |Q(iω)|²`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::model::{ModelParams, RateFunctions};
use crate::poly;

/// Coefficients of the linearized system
///
/// ```text
/// q' = -A q + B q(t-τ) - C e + D e(t-τ)
/// m' = -μ m + G q
/// e' = -k e - H m
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub g: f64,
    pub h: f64,
    pub tau: f64,
}

impl LinCoeffs {
    /// Sign conditions expected at a positive equilibrium that do not hold here.
    pub fn positive_equilibrium_violations(&self) -> Vec<&'static str> {
        let checks = [
            (self.c > 0.0, "C > 0"),
            (self.d > 0.0, "D > 0"),
            (self.g > 0.0, "G > 0"),
            (self.h > 0.0, "H > 0"),
            // A - B is zero in exact arithmetic for E-only β
            (self.a - self.b >= -1e-10 * self.a.abs(), "A - B >= 0"),
            (self.d - self.c > 0.0, "D - C > 0"),
        ];
        checks.iter().filter(|(ok, _)| !ok).map(|(_, n)| *n).collect()
    }
}

/// Linearization coefficients at `eq`, evaluated at the delay `eq.tau`.
pub fn linearize<R: RateFunctions>(p: &ModelParams<R>, eq: &Equilibrium) -> LinCoeffs {
    let r = &p.rates;
    let (q, m, e) = (eq.state.q, eq.state.m, eq.state.e);
    let twice = p.division_factor(eq.tau);
    let beta = r.beta(q, e);
    let beta_q = r.beta_dq(q, e);
    let beta_e = r.beta_de(q, e);
    LinCoeffs {
        a: p.delta + r.g_prime(q) + beta + beta_q * q,
        b: twice * (beta + beta_q * q),
        c: beta_e * q,
        d: twice * beta_e * q,
        g: r.g_prime(q),
        h: -r.f_prime(m),
        tau: eq.tau,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Source coefficients and rates, kept for the alternative forms.
    pub lin: LinCoeffs,
    pub mu: f64,
    pub k: f64,
}

impl CharCoeffs {
    pub fn p_at(&self, l: Complex64) -> Complex64 {
        ((l + self.a1) * l + self.a2) * l + self.a3
    }

    pub fn q_at(&self, l: Complex64) -> Complex64 {
        (l * self.a4 + self.a5) * l + self.a6
    }

    pub fn h_coeffs(&self) -> [f64; 3] {
        [self.b1, self.b2, self.b3]
    }

    pub fn h(&self, z: f64) -> f64 {
        poly::cubic(self.h_coeffs(), z)
    }

    pub fn dh_dz(&self, z: f64) -> f64 {
        poly::cubic_prime(self.h_coeffs(), z)
    }

    /// `Δ = b₁² - 3b₂`.
    pub fn discriminant(&self) -> f64 {
        self.b1 * self.b1 - 3.0 * self.b2
    }

    /// `z₀ = (-b₁ + √Δ)/3`, the larger critical point of `h`, when `Δ ≥ 0`.
    pub fn z0(&self) -> Option<f64> {
        let d = self.discriminant();
        (d >= 0.0).then(|| (-self.b1 + d.sqrt()) / 3.0)
    }

    /// `|Q(iω)|² = a₄²ω⁴ + (a₅² - 2a₄a₆)ω² + a₆²`.
    pub fn q_abs_sq(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        (self.a4 * self.a4 * w2 + self.a5 * self.a5 - 2.0 * self.a4 * self.a6) * w2
            + self.a6 * self.a6
    }
}

fn agree(name: &str, x: f64, y: f64, terms: &[f64]) -> Result<()> {
    let scale = terms.iter().fold(x.abs().max(y.abs()), |m, t| m.max(t.abs()));
    if !((x - y).abs() <= 1e-9 * scale) {
        return Err(Error::Inconsistent(format!(
            "{name}: compact form {x:e} vs expanded form {y:e}"
        )));
    }
    Ok(())
}

/// `a₁…a₆` and `b₁…b₃` from the linearization. The `b` coefficients are
/// computed both from the `a`'s and from the expanded expressions in
/// `A…H, μ, k`; disagreement beyond `1e-9` relative is an error.
pub fn char_coeffs(c: &LinCoeffs, mu: f64, k: f64) -> Result<CharCoeffs> {
    let LinCoeffs { a, b, c: cc, d, g, h, .. } = *c;
    let gh = g * h;
    let a1 = mu + k + a;
    let a2 = mu * k + a * (mu + k);
    let a3 = mu * k * a - gh * cc;
    let a4 = -b;
    let a5 = -b * (mu + k);
    let a6 = -b * mu * k + gh * d;

    let b1 = a1 * a1 - 2.0 * a2 - a4 * a4;
    let b2 = a2 * a2 + 2.0 * a4 * a6 - 2.0 * a1 * a3 - a5 * a5;
    let b3 = a3 * a3 - a6 * a6;

    let (mu2, k2) = (mu * mu, k * k);
    let ab = a * a - b * b;
    let b1x = mu2 + k2 + ab;
    let b2x = mu2 * k2 + ab * (mu2 + k2) + 2.0 * gh * (cc * (mu + k + a) - b * d);
    let b3x = mu2 * k2 * ab + gh * gh * (cc * cc - d * d) + 2.0 * mu * k * gh * (b * d - a * cc);

    agree("b1", b1, b1x, &[a1 * a1, 2.0 * a2, a4 * a4])?;
    agree("b2", b2, b2x, &[a2 * a2, 2.0 * a4 * a6, 2.0 * a1 * a3, a5 * a5])?;
    agree("b3", b3, b3x, &[a3 * a3, a6 * a6])?;

    Ok(CharCoeffs { a1, a2, a3, a4, a5, a6, b1, b2, b3, lin: *c, mu, k })
}

/// Routh–Hurwitz verdict for the zero-delay cubic
/// `λ³ + (a₁+a₄)λ² + (a₂+a₅)λ + (a₃+a₆)`.
///
/// The Hurwitz margin `(a₁+a₄)(a₂+a₅) - (a₃+a₆)` is also computed as
/// `(μ+k)[μk + (A-B)(μ+k+A-B)] - GH(D-C)`; the two must agree.
/// The coefficients are expected to come from `τ = 0`.
pub fn routh_hurwitz_tau0(cc: &CharCoeffs) -> Result<bool> {
    let s1 = cc.a1 + cc.a4;
    let s2 = cc.a2 + cc.a5;
    let s3 = cc.a3 + cc.a6;
    let margin = s1 * s2 - s3;

    let LinCoeffs { a, b, c, d, g, h, .. } = cc.lin;
    let (mu, k) = (cc.mu, cc.k);
    let amb = a - b;
    let lhs = (mu + k) * (mu * k + amb * (mu + k + amb));
    let rhs = g * h * (d - c);
    agree("Hurwitz margin", margin, lhs - rhs, &[s1 * s2, s3, lhs, rhs])?;

    Ok(s1 > 0.0 && s3 > 0.0 && margin > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrivialVerdict {
    Stable,
    Unstable,
    /// `δ + g'(0) = (2e^{-γτ}-1)β(0, f(0)/k)`: the transcritical point.
    Boundary,
}

/// Local stability of `(0, 0, f(0)/k)`: stable iff
/// `δ + g'(0) > (2e^{-γτ}-1)β(0, f(0)/k)`.
pub fn trivial_stability<R: RateFunctions>(p: &ModelParams<R>, tau: f64) -> TrivialVerdict {
    let s = p.delta + p.rates.g_prime(0.0);
    let gain = p.alpha(tau) * p.beta_at_trivial();
    if (s - gain).abs() <= 1e-12 * (s.abs() + gain.abs()) {
        TrivialVerdict::Boundary
    } else if s > gain {
        TrivialVerdict::Stable
    } else {
        TrivialVerdict::Unstable
    }
}

/// Root of `ζ = -Aτ tan ζ` on `(0, π)`, for `Aτ > -1`.
///
/// Solved as `ζ cos ζ + Aτ sin ζ = 0`, which has no pole: on `(π/2, π)` when
/// `Aτ > 0`, on `(0, π/2)` when `-1 < Aτ < 0`, and `ζ = π/2` when `Aτ = 0`.
pub fn hayes_zeta(a_tau: f64) -> f64 {
    if a_tau == 0.0 {
        return FRAC_PI_2;
    }
    let phi = |z: f64| z * z.cos() + a_tau * z.sin();
    let (mut lo, mut hi) = if a_tau > 0.0 { (FRAC_PI_2, PI) } else { (0.0, FRAC_PI_2) };
    // phi(lo) > 0 > phi(hi) on both intervals
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hayes conditions: every root of `λ + A - B e^{-λτ} = 0` has negative real
/// part iff `Aτ > -1`, `Aτ - Bτ > 0` and `Bτ < ζ sin ζ - Aτ cos ζ`.
pub fn hayes_check(a: f64, b: f64, tau: f64) -> bool {
    if tau == 0.0 {
        return b - a < 0.0;
    }
    let (at, bt) = (a * tau, b * tau);
    if at <= -1.0 || at - bt <= 0.0 {
        return false;
    }
    let z = hayes_zeta(at);
    bt < z * z.sin() - at * z.cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{positive_equilibrium, tau_max, trivial_equilibrium};
    use crate::model::{rhs, HillRates, SystemState};
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at(tau: f64) -> (ModelParams, Equilibrium, LinCoeffs, CharCoeffs) {
        let p = ModelParams::reference(tau);
        let eq = positive_equilibrium(&p, tau).unwrap().unwrap();
        let lin = linearize(&p, &eq);
        let cc = char_coeffs(&lin, p.mu, p.k).unwrap();
        (p, eq, lin, cc)
    }

    #[test]
    fn hill_a_equals_b() {
        for tau in [0.0, 0.7, 1.4, 2.5] {
            let (p, _, lin, _) = at(tau);
            let alpha = p.alpha(tau);
            let s = p.delta + p.rates.g_rate;
            let expected = s * (alpha + 1.0) / alpha;
            assert_relative_eq!(lin.a, expected, max_relative = 1e-9);
            assert_relative_eq!(lin.b, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn trivial_linearization() {
        let p = ModelParams::reference(1.0);
        let eq = trivial_equilibrium(&p, 1.0);
        let lin = linearize(&p, &eq);
        assert_eq!((lin.c, lin.d), (0.0, 0.0));
        assert!(lin.a > 0.0 && lin.b > 0.0);
        assert_relative_eq!(lin.b, 2.0 * (-0.2f64).exp() * p.beta_at_trivial(), max_relative = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (p, eq, lin, _) = at(1.0);
        let x = eq.state;
        let h = 1e-6;
        let mut now_jac = Matrix3::zeros();
        let mut del_jac = Matrix3::zeros();
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = h * x.as_array()[j].abs().max(1.0);
            let dx = SystemState::new(e[0], e[1], e[2]);
            let col = |a: SystemState, b: SystemState| (a - b) * (0.5 / e[j]);
            let dn = col(rhs(x + dx, x, &p).unwrap(), rhs(x - dx, x, &p).unwrap());
            let dd = col(rhs(x, x + dx, &p).unwrap(), rhs(x, x - dx, &p).unwrap());
            for (i, v) in dn.as_array().into_iter().enumerate() {
                now_jac[(i, j)] = v;
            }
            for (i, v) in dd.as_array().into_iter().enumerate() {
                del_jac[(i, j)] = v;
            }
        }
        let a1 = Matrix3::new(-lin.a, 0.0, -lin.c, lin.g, -p.mu, 0.0, 0.0, -lin.h, -p.k);
        let a2 = Matrix3::new(lin.b, 0.0, lin.d, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (num, exact) in [(now_jac, a1), (del_jac, a2)] {
            for (u, v) in num.iter().zip(exact.iter()) {
                assert!((u - v).abs() <= 1e-6 * (1.0 + v.abs()), "{num} vs {exact}");
            }
        }
    }

    #[test]
    fn property_a_at_tau_one() {
        let (_, _, _, cc) = at(1.0);
        assert!(cc.a1 + cc.a4 > 0.0);
        assert!(cc.a2 + cc.a5 > 0.0);
        assert!(cc.a3 + cc.a6 > 0.0);
    }

    #[test]
    fn b1_is_delay_independent_for_hill() {
        for tau in [0.0, 0.5, 1.0, 2.0, 2.9] {
            let (_, _, _, cc) = at(tau);
            assert_relative_eq!(cc.b1, 7.8404, max_relative = 1e-12);
        }
    }

    #[test]
    fn hill_simplified_b2_b3() {
        for tau in [0.3, 1.2, 2.7] {
            let (p, _, l, cc) = at(tau);
            let (mu, k) = (p.mu, p.k);
            let gh = l.g * l.h;
            let b2 = mu * mu * k * k + 2.0 * gh * (l.c * (mu + k + l.a) - l.a * l.d);
            let b3 = gh * (l.d - l.c) * (2.0 * mu * k * l.a - gh * (l.c + l.d));
            assert_relative_eq!(cc.b2, b2, max_relative = 1e-8);
            assert_relative_eq!(cc.b3, b3, max_relative = 1e-8);
        }
    }

    #[test]
    fn vanishing_delay_terms() {
        let lin = LinCoeffs { a: 1.0, b: 0.0, c: 0.0, d: 0.0, g: 0.3, h: 0.2, tau: 0.0 };
        let cc = char_coeffs(&lin, 0.1, 0.4).unwrap();
        assert_eq!((cc.a4, cc.a5, cc.a6), (0.0, 0.0, 0.0));
    }

    #[test]
    fn disagreeing_forms_are_an_error() {
        assert!(agree("b2", 1.0, 1.0 + 1e-12, &[3.0]).is_ok());
        assert!(matches!(agree("b2", 1.0, 1.001, &[3.0]), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn h_equals_power_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let tm = tau_max(&ModelParams::reference(0.0)).unwrap();
        for _ in 0..100 {
            let tau = rng.gen_range(0.0..tm * 0.999);
            let z: f64 = rng.gen_range(0.0..2.0);
            let (_, _, _, cc) = at(tau);
            let iw = Complex64::new(0.0, z.sqrt());
            let direct = cc.p_at(iw).norm_sqr() - cc.q_at(iw).norm_sqr();
            let scale = cc.p_at(iw).norm_sqr() + cc.q_at(iw).norm_sqr();
            assert!((cc.h(z) - direct).abs() <= 1e-9 * scale, "{} vs {direct}", cc.h(z));
        }
    }

    #[test]
    fn reference_is_stable_without_delay() {
        let (_, _, _, cc) = at(0.0);
        assert!(routh_hurwitz_tau0(&cc).unwrap());
    }

    #[test]
    fn no_feedback_gain_is_stable() {
        // GH(D - C) = 0 with A >= B
        let lin = LinCoeffs { a: 0.5, b: 0.3, c: 0.2, d: 0.2, g: 0.04, h: 1.0, tau: 0.0 };
        let cc = char_coeffs(&lin, 0.02, 2.8).unwrap();
        assert!(routh_hurwitz_tau0(&cc).unwrap());
    }

    fn rightmost_real_part(cc: &CharCoeffs) -> f64 {
        let (s1, s2, s3) = (cc.a1 + cc.a4, cc.a2 + cc.a5, cc.a3 + cc.a6);
        let m = Matrix3::new(-s1, -s2, -s3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn routh_hurwitz_matches_companion_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut n = 0;
        while n < 500 {
            let b = rng.gen_range(0.0..2.0);
            let c = rng.gen_range(0.0..2.0);
            let lin = LinCoeffs {
                a: b + rng.gen_range(0.0..1.0),
                b,
                c,
                d: c + rng.gen_range(0.0..3.0),
                g: rng.gen_range(0.01..2.0),
                h: rng.gen_range(0.01..20.0),
                tau: 0.0,
            };
            let cc = char_coeffs(&lin, rng.gen_range(0.01..2.0), rng.gen_range(0.01..3.0)).unwrap();
            let re = rightmost_real_part(&cc);
            if re.abs() < 1e-7 {
                continue;
            }
            assert_eq!(routh_hurwitz_tau0(&cc).unwrap(), re < 0.0, "{lin:?} re = {re}");
            n += 1;
        }
    }

    #[test]
    fn trivial_state_unstable_when_positive_exists() {
        let p = ModelParams::reference(0.0);
        let tm = tau_max(&p).unwrap();
        for i in 0..50 {
            let tau = tm * i as f64 / 50.0;
            assert_eq!(trivial_stability(&p, tau), TrivialVerdict::Unstable);
        }
    }

    #[test]
    fn trivial_state_stable_for_small_beta0_and_hayes_agrees() {
        let mut p = ModelParams::reference(0.0);
        p.rates = HillRates { beta0: 0.04, ..HillRates::DEFAULT };
        for tau in [0.5, 1.0, 2.0] {
            assert_eq!(trivial_stability(&p, tau), TrivialVerdict::Stable);
            let lin = linearize(&p, &trivial_equilibrium(&p, tau));
            assert!(hayes_check(lin.a, lin.b, tau));
        }
    }

    #[test]
    fn hayes_detects_real_unstable_root() {
        // B > A > 0: λ + A = B e^{-λτ} has a positive real root.
        for tau in [0.3, 1.0, 4.0] {
            assert!(!hayes_check(0.5, 0.7, tau));
        }
        let p = ModelParams::reference(0.0);
        let lin = linearize(&p, &trivial_equilibrium(&p, 1.0));
        assert!(lin.b > lin.a);
        assert!(!hayes_check(lin.a, lin.b, 1.0));
    }

    #[test]
    fn hayes_at_zero_delay() {
        assert!(hayes_check(1.0, 0.5, 0.0));
        assert!(!hayes_check(0.5, 1.0, 0.0));
    }

    #[test]
    fn zeta_solves_tangent_equation() {
        for at in [-0.9, -0.3, 0.0, 0.4, 3.0, 50.0] {
            let z = hayes_zeta(at);
            assert!(z > 0.0 && z < PI);
            if at != 0.0 {
                assert!((z + at * z.tan()).abs() < 1e-9 * (1.0 + at.abs() * z.tan().abs()), "{at}");
            }
        }
    }

    #[test]
    fn boundary_verdict_at_transcritical_point() {
        let mut p = ModelParams::reference(0.0);
        p.gamma = 0.0;
        p.delta = p.beta_at_trivial() - p.rates.g_rate;
        assert_eq!(trivial_stability(&p, 0.0), TrivialVerdict::Boundary);
    }

    #[test]
    fn positive_equilibrium_sign_invariants() {
        let p = ModelParams::reference(0.0);
        let tm = tau_max(&p).unwrap();
        for i in 0..200 {
            let tau = tm * i as f64 / 200.0;
            let eq = positive_equilibrium(&p, tau).unwrap().unwrap();
            let lin = linearize(&p, &eq);
            assert!(lin.positive_equilibrium_violations().is_empty(), "{tau}: {lin:?}");
        }
    }
}
