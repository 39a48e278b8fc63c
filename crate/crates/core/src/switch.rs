//! Stability switches of the positive equilibrium as the delay varies.
//!
//! Purely imaginary roots `λ = iω` of `P(λ,τ) + Q(λ,τ)e^{-λτ} = 0` require
//! `h(ω², τ) = 0`. On each positive root branch `ω(τ)` the phase `θ(τ)` is
//! fixed by `cos θ = -Re(P/Q)`, `sin θ = Im(P/Q)` at `iω` (that is,
//! `e^{-iθ} = -P/Q`), and a crossing
//! happens exactly at the zeros of
//!
//! ```text
//! S_n(τ) = τ - (θ(τ) + 2nπ) / ω(τ),   n = 0, 1, …
//! ```
//!
//! The direction of the crossing is `sign(∂h/∂z(ω²)) · sign(dS_n/dτ)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{positive_equilibrium, tau_max, Equilibrium};
use crate::error::{Error, Result};
use crate::linearization::{char_coeffs, linearize, routh_hurwitz_tau0, CharCoeffs, LinCoeffs};
use crate::model::{ModelParams, RateFunctions};
use crate::poly::real_roots_monic_cubic;

/// Target for `|S_n(τ*)|` after refinement.
pub const CROSSING_TOLERANCE: f64 = 1e-10;
/// Central-difference step for `dS_n/dτ`.
pub const DERIVATIVE_STEP: f64 = 1e-5;
/// Crossings closer than this on different branches are treated as simultaneous.
const SIMULTANEOUS: f64 = 1e-9;

/// A positive root `z = ω²` of `h(·, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HRoot {
    pub z: f64,
    pub dh_dz: f64,
}

impl HRoot {
    pub fn omega(&self) -> f64 {
        self.z.sqrt()
    }

    pub fn dh_dz_sign(&self) -> i8 {
        sign(self.dh_dz)
    }
}

/// Positive frequencies at one delay, descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaBranch {
    pub tau: f64,
    pub roots: Vec<HRoot>,
}

impl OmegaBranch {
    pub fn omegas(&self) -> Vec<f64> {
        self.roots.iter().map(HRoot::omega).collect()
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Whether `h(·,τ)` has a positive root, decided from `b₁, b₂, b₃` alone:
/// `b₃ < 0`, or `b₃ ≥ 0` with
/// (i) `b₂ < 0` or `b₁ < 0 ≤ b₂ < b₁²/3`, and
/// (ii) `2Δz₀ + b₁b₂ - 9b₃ > 0`.
pub fn root_criterion(cc: &CharCoeffs) -> bool {
    criterion_with_margin(cc).0
}

/// The verdict and the quantity it hinges on (`b₃`, or the (ii) expression).
fn criterion_with_margin(cc: &CharCoeffs) -> (bool, f64) {
    let (b1, b2, b3) = (cc.b1, cc.b2, cc.b3);
    if b3 < 0.0 {
        return (true, b3);
    }
    let first = b2 < 0.0 || (b1 < 0.0 && 0.0 <= b2 && b2 < b1 * b1 / 3.0);
    if !first {
        return (false, b3);
    }
    let delta = cc.discriminant();
    let z0 = (-b1 + delta.sqrt()) / 3.0;
    let margin = 2.0 * delta * z0 + b1 * b2 - 9.0 * b3;
    (margin > 0.0, margin)
}

/// Positive real roots of `h(z) = z³ + b₁z² + b₂z + b₃`, descending, each
/// tagged with `∂h/∂z`. The result is cross-checked against
/// [`root_criterion`]; a disagreement away from degenerate (tangent or
/// `b₃ ≈ 0`) configurations is an error.
pub fn positive_roots_h(cc: &CharCoeffs) -> Result<Vec<HRoot>> {
    let mut roots: Vec<HRoot> = real_roots_monic_cubic(cc.h_coeffs())
        .into_iter()
        .filter(|&z| z > 0.0)
        .map(|z| HRoot { z, dh_dz: cc.dh_dz(z) })
        .collect();
    roots.sort_by(|a, b| b.z.total_cmp(&a.z));

    let (exists, margin) = criterion_with_margin(cc);
    if exists != !roots.is_empty() {
        let scale = 1.0 + cc.b1.abs().powi(3) + cc.b2.abs().powf(1.5) + cc.b3.abs();
        let degenerate = margin.abs() <= 1e-10 * scale || cc.b3.abs() <= 1e-10 * scale;
        if !degenerate {
            return Err(Error::Inconsistent(format!(
                "root criterion says {exists} but {} positive roots were extracted (b = {:e}, {:e}, {:e})",
                roots.len(),
                cc.b1,
                cc.b2,
                cc.b3
            )));
        }
    }
    Ok(roots)
}

/// `θ ∈ [0, 2π)` with
///
/// ```text
/// cos θ = ((a₅ - a₁a₄)ω⁴ + (a₁a₆ + a₃a₄ - a₂a₅)ω² - a₃a₆) / |Q(iω)|²
/// sin θ = (a₄ω⁵ + (a₁a₅ - a₂a₄ - a₆)ω³ + (a₂a₆ - a₃a₅)ω) / |Q(iω)|²
/// ```
pub fn theta(cc: &CharCoeffs, omega: f64) -> Result<f64> {
    let (cos_num, sin_num, den) = theta_parts(cc, omega);
    if !(den > 1e-300) {
        return Err(Error::DegenerateDenominator { omega, denominator: den });
    }
    let t = sin_num.atan2(cos_num);
    Ok(if t < 0.0 { t + TAU } else { t })
}

/// Numerators of `cos θ`, `sin θ` and their common denominator `|Q(iω)|²`.
pub fn theta_parts(cc: &CharCoeffs, omega: f64) -> (f64, f64, f64) {
    let CharCoeffs { a1, a2, a3, a4, a5, a6, .. } = *cc;
    let w2 = omega * omega;
    let cos_num = ((a5 - a1 * a4) * w2 + (a1 * a6 + a3 * a4 - a2 * a5)) * w2 - a3 * a6;
    let sin_num = ((a4 * w2 + (a1 * a5 - a2 * a4 - a6)) * w2 + (a2 * a6 - a3 * a5)) * omega;
    (cos_num, sin_num, cc.q_abs_sq(omega))
}

/// `P(λ,τ) + Q(λ,τ)e^{-λτ}`.
pub fn char_residual(cc: &CharCoeffs, lambda: Complex64, tau: f64) -> Complex64 {
    cc.p_at(lambda) + cc.q_at(lambda) * (-lambda * tau).exp()
}

/// One positive-frequency branch at a fixed delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub omega: f64,
    pub dh_dz: f64,
    pub theta: f64,
}

impl BranchPoint {
    pub fn s_n(&self, tau: f64, n: u32) -> f64 {
        tau - (self.theta + TAU * n as f64) / self.omega
    }
}

/// Everything the scan needs at one delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayAnalysis {
    pub tau: f64,
    pub equilibrium: Equilibrium,
    pub lin: LinCoeffs,
    pub cc: CharCoeffs,
    /// Descending in `ω`; at most three.
    pub branches: Vec<BranchPoint>,
}

impl DelayAnalysis {
    pub fn omega_branch(&self) -> OmegaBranch {
        OmegaBranch {
            tau: self.tau,
            roots: self
                .branches
                .iter()
                .map(|b| HRoot { z: b.omega * b.omega, dh_dz: b.dh_dz })
                .collect(),
        }
    }
}

/// Equilibrium, coefficients and frequency branches at `tau`; `None` when no
/// positive equilibrium exists there.
pub fn analyze_delay<R: RateFunctions>(p: &ModelParams<R>, tau: f64) -> Result<Option<DelayAnalysis>> {
    let Some(eq) = positive_equilibrium(p, tau)? else {
        return Ok(None);
    };
    let lin = linearize(p, &eq);
    let cc = char_coeffs(&lin, p.mu, p.k)?;
    let branches = positive_roots_h(&cc)?
        .into_iter()
        .map(|r| {
            let omega = r.omega();
            Ok(BranchPoint { omega, dh_dz: r.dh_dz, theta: theta(&cc, omega)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(DelayAnalysis { tau, equilibrium: eq, lin, cc, branches }))
}

/// `S_n(τ)` on the requested branch; `None` where the branch does not exist.
pub fn sn_value<R: RateFunctions>(
    p: &ModelParams<R>,
    tau: f64,
    n: u32,
    branch: usize,
) -> Result<Option<f64>> {
    Ok(analyze_delay(p, tau)?
        .and_then(|a| a.branches.get(branch).map(|b| b.s_n(tau, n))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnCurve {
    pub n: u32,
    pub branch: usize,
    /// `(τ, S_n(τ))` on the grid points where the branch exists.
    pub samples: Vec<(f64, f64)>,
    /// Refined zeros.
    pub roots: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Roots move into the right half-plane as τ increases.
    Destabilizing,
    Stabilizing,
    Unclassified,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Destabilizing => "destabilizing",
            Direction::Stabilizing => "stabilizing",
            Direction::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub tau_star: f64,
    pub omega_star: f64,
    pub n: u32,
    pub branch: usize,
    /// `sign(∂h/∂z) · sign(dS_n/dτ)`.
    pub transversality: i8,
    pub direction: Direction,
    /// `|P(iω*) + Q(iω*)e^{-iω*τ*}|`.
    pub residual: f64,
    pub dh_dz: f64,
    pub ds_dtau: f64,
    /// False when bisection could not reach [`CROSSING_TOLERANCE`].
    pub refined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityInterval {
    pub start: f64,
    pub end: f64,
    pub verdict: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub tau_max: f64,
    pub stable_at_zero: bool,
    /// Delay intervals on which `h` has positive roots.
    pub root_window: Vec<(f64, f64)>,
    pub curves: Vec<SnCurve>,
    pub reports: Vec<SwitchReport>,
    pub partition: Vec<StabilityInterval>,
}

impl ScanResult {
    pub fn verdict_at(&self, tau: f64) -> Stability {
        self.partition
            .iter()
            .find(|iv| tau >= iv.start && tau < iv.end)
            .map_or(Stability::Unknown, |iv| iv.verdict)
    }
}

/// Samples `S_0 … S_{n_max}` on every live branch over `grid`, refines their
/// sign changes, classifies each crossing and assembles the stability
/// partition of `[0, τ_max)` seeded by the zero-delay Routh–Hurwitz verdict.
///
/// The grid is expected to cover `[0, τ_max)` with spacing of at most 0.005.
pub fn scan<R: RateFunctions>(p: &ModelParams<R>, grid: &[f64], n_max: u32) -> Result<ScanResult> {
    let tm = tau_max(p).ok_or_else(|| Error::Domain("scan without a positive equilibrium".into()))?;

    let samples: Vec<Option<DelayAnalysis>> = grid
        .par_iter()
        .map(|&t| analyze_delay(p, t))
        .collect::<Result<_>>()?;

    let at_zero = match samples.first() {
        Some(Some(a)) if a.tau == 0.0 => a.cc,
        _ => analyze_delay(p, 0.0)?
            .ok_or_else(|| Error::Domain("no positive equilibrium at tau = 0".into()))?
            .cc,
    };
    let stable_at_zero = routh_hurwitz_tau0(&at_zero)?;

    let end = if tm.is_finite() { tm } else { grid.last().copied().unwrap_or(0.0) };
    let root_window = root_window(p, grid, &samples, end)?;

    let max_branches = samples
        .iter()
        .flatten()
        .map(|a| a.branches.len())
        .max()
        .unwrap_or(0);

    let mut curves = Vec::new();
    let mut reports = Vec::new();
    for n in 0..=n_max {
        for b in 0..max_branches {
            let pts: Vec<(f64, BranchPoint)> = samples
                .iter()
                .flatten()
                .filter_map(|a| a.branches.get(b).map(|bp| (a.tau, *bp)))
                .collect();
            let mut curve = SnCurve {
                n,
                branch: b,
                samples: pts.iter().map(|(t, bp)| (*t, bp.s_n(*t, n))).collect(),
                roots: Vec::new(),
            };
            for w in pts.windows(2) {
                let ((t0, p0), (t1, p1)) = (w[0], w[1]);
                let (s0, s1) = (p0.s_n(t0, n), p1.s_n(t1, n));
                if !(s0 == 0.0 || s0.signum() != s1.signum()) || s1 == 0.0 {
                    continue;
                }
                // θ wrapping through 0/2π is a jump of S_n, not a zero
                if (p1.theta - p0.theta).abs() > PI {
                    continue;
                }
                if let Some(report) = refine_crossing(p, t0, t1, s0, n, b)? {
                    curve.roots.push(report.tau_star);
                    reports.push(report);
                }
            }
            curves.push(curve);
        }
    }

    reports.sort_by(|a, b| a.tau_star.total_cmp(&b.tau_star));
    for i in 0..reports.len() {
        let simultaneous = reports.iter().enumerate().any(|(j, r)| {
            j != i
                && r.branch != reports[i].branch
                && (r.tau_star - reports[i].tau_star).abs() < SIMULTANEOUS
        });
        if simultaneous {
            reports[i].direction = Direction::Unclassified;
        }
    }

    let partition = partition(stable_at_zero, &reports, end);
    Ok(ScanResult { tau_max: tm, stable_at_zero, root_window, curves, reports, partition })
}

/// Bisection for a zero of `S_n` on `[lo, hi]` followed by classification.
fn refine_crossing<R: RateFunctions>(
    p: &ModelParams<R>,
    mut lo: f64,
    mut hi: f64,
    s_lo: f64,
    n: u32,
    branch: usize,
) -> Result<Option<SwitchReport>> {
    let eval = |t: f64| sn_value(p, t, n, branch);
    let lo_sign = s_lo.signum();
    let mut tau = 0.5 * (lo + hi);
    let mut refined = false;
    for _ in 0..200 {
        let Some(s) = eval(tau)? else { break };
        if s.abs() < CROSSING_TOLERANCE {
            refined = true;
            break;
        }
        if s.signum() == lo_sign {
            lo = tau;
        } else {
            hi = tau;
        }
        let next = 0.5 * (lo + hi);
        if next == lo || next == hi {
            // Bracket exhausted: either a jump in S_n or the tolerance is
            // below what the arithmetic resolves.
            if s.abs() > 1e-6 {
                return Ok(None);
            }
            break;
        }
        tau = next;
    }

    let Some(a) = analyze_delay(p, tau)? else { return Ok(None) };
    let Some(bp) = a.branches.get(branch).copied() else { return Ok(None) };

    let ds = |h: f64| -> Result<Option<f64>> {
        match (eval(tau + h)?, eval(tau - h)?) {
            (Some(f), Some(b)) => Ok(Some((f - b) / (2.0 * h))),
            _ => Ok(None),
        }
    };
    let ds_dtau = match (ds(DERIVATIVE_STEP)?, ds(0.5 * DERIVATIVE_STEP)?) {
        (Some(d1), Some(d2)) => (4.0 * d2 - d1) / 3.0,
        (Some(d1), None) | (None, Some(d1)) => d1,
        (None, None) => f64::NAN,
    };
    let transversality = if ds_dtau.is_nan() { 0 } else { sign(bp.dh_dz) * sign(ds_dtau) };
    let direction = match transversality {
        1 => Direction::Destabilizing,
        -1 => Direction::Stabilizing,
        _ => Direction::Unclassified,
    };
    let residual = char_residual(&a.cc, Complex64::new(0.0, bp.omega), tau).norm();

    Ok(Some(SwitchReport {
        tau_star: tau,
        omega_star: bp.omega,
        n,
        branch,
        transversality,
        direction,
        residual,
        dh_dz: bp.dh_dz,
        ds_dtau,
        refined,
    }))
}

/// Intervals of the grid where [`root_criterion`] holds, with interior
/// boundaries refined by bisection.
fn root_window<R: RateFunctions>(
    p: &ModelParams<R>,
    grid: &[f64],
    samples: &[Option<DelayAnalysis>],
    end: f64,
) -> Result<Vec<(f64, f64)>> {
    let holds = |t: f64| -> Result<bool> {
        Ok(analyze_delay(p, t)?.is_some_and(|a| root_criterion(&a.cc)))
    };
    let flags: Vec<bool> = samples
        .iter()
        .map(|s| s.as_ref().is_some_and(|a| root_criterion(&a.cc)))
        .collect();

    let boundary = |mut inside: f64, mut outside: f64| -> Result<f64> {
        while (outside - inside).abs() > 1e-12 {
            let mid = 0.5 * (inside + outside);
            if holds(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };

    let mut out = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        if !flags[i] {
            i += 1;
            continue;
        }
        let start = if i == 0 { grid[0] } else { boundary(grid[i], grid[i - 1])? };
        let mut j = i;
        while j + 1 < flags.len() && flags[j + 1] {
            j += 1;
        }
        let stop = if j + 1 < flags.len() {
            boundary(grid[j], grid[j + 1])?
        } else {
            let probe = end - 1e-9 * end.max(1.0);
            if probe <= grid[j] || holds(probe)? {
                end
            } else {
                boundary(grid[j], probe)?
            }
        };
        out.push((start, stop));
        i = j + 1;
    }
    Ok(out)
}

/// Stability intervals from a net crossing count: zero pairs in the right
/// half-plane means stable. Unclassified crossings make the rest unknown.
fn partition(stable_at_zero: bool, reports: &[SwitchReport], end: f64) -> Vec<StabilityInterval> {
    let mut count: i32 = if stable_at_zero { 0 } else { 1 };
    let mut known = true;
    let verdict = |count: i32, known: bool| match (known, count) {
        (false, _) => Stability::Unknown,
        (true, 0) => Stability::Stable,
        _ => Stability::Unstable,
    };
    let mut out = Vec::new();
    let mut start = 0.0;
    for r in reports.iter().filter(|r| r.tau_star > 0.0 && r.tau_star < end) {
        out.push(StabilityInterval { start, end: r.tau_star, verdict: verdict(count, known) });
        match r.direction {
            Direction::Destabilizing => count += 1,
            Direction::Stabilizing => count = (count - 1).max(0),
            Direction::Unclassified => known = false,
        }
        start = r.tau_star;
    }
    out.push(StabilityInterval { start, end, verdict: verdict(count, known) });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearization::LinCoeffs;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs_with_b(b1: f64, b2: f64, b3: f64) -> CharCoeffs {
        let lin = LinCoeffs { a: 0.0, b: 0.0, c: 0.0, d: 0.0, g: 0.0, h: 0.0, tau: 0.0 };
        CharCoeffs { a1: 0.0, a2: 0.0, a3: 0.0, a4: 0.0, a5: 0.0, a6: 0.0, b1, b2, b3, lin, mu: 0.0, k: 0.0 }
    }

    fn reference_at(tau: f64) -> DelayAnalysis {
        analyze_delay(&ModelParams::reference(tau), tau).unwrap().unwrap()
    }

    #[test]
    fn pure_cube_root() {
        let roots = positive_roots_h(&coeffs_with_b(0.0, 0.0, -8.0)).unwrap();
        assert_eq!(roots.len(), 1);
        assert_relative_eq!(roots[0].z, 2.0, max_relative = 1e-14);
        assert!(roots[0].dh_dz > 0.0);
    }

    #[test]
    fn reference_single_root_with_positive_slope() {
        let a = reference_at(1.0);
        let roots = positive_roots_h(&a.cc).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].dh_dz_sign(), 1);
        assert!(a.cc.h(roots[0].z).abs() < 1e-9 * (1.0 + a.cc.b3.abs()));
    }

    #[test]
    fn roots_match_companion_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        for _ in 0..300 {
            let (b1, b2, b3) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let got = match positive_roots_h(&coeffs_with_b(b1, b2, b3)) {
                Ok(r) => r.into_iter().map(|r| r.z).collect::<Vec<_>>(),
                Err(e) => panic!("({b1}, {b2}, {b3}): {e}"),
            };
            let m = Matrix3::new(-b1, -b2, -b3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
            let mut want: Vec<f64> = m
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() < 1e-7 && z.re > 0.0)
                .map(|z| z.re)
                .collect();
            want.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(got.len(), want.len(), "({b1}, {b2}, {b3}): {got:?} vs {want:?}");
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-8 * (1.0 + w.abs()), "{g} vs {w}");
            }
            assert_eq!(root_criterion(&coeffs_with_b(b1, b2, b3)), !got.is_empty());
        }
    }

    #[test]
    fn criterion_branches() {
        // b3 >= 0, b2 < 0 and a root pair to the right: (z-1)(z-2)(z+1)
        let cc = coeffs_with_b(-2.0, -1.0, 2.0);
        assert!(root_criterion(&cc));
        assert_eq!(positive_roots_h(&cc).unwrap().len(), 2);
        // b1 < 0 <= b2 < b1²/3: (z-1)(z-2)(z-3)
        let cc = coeffs_with_b(-6.0, 11.0, -6.0);
        assert!(root_criterion(&cc));
        let cc = coeffs_with_b(-6.0, 11.0, 6.0 + 1e-3);
        // shifted up: all positive coefficients except b1; h(z0) may still dip
        assert_eq!(root_criterion(&cc), !positive_roots_h(&cc).unwrap().is_empty());
        // everything positive: no positive root
        assert!(!root_criterion(&coeffs_with_b(1.0, 1.0, 1.0)));
    }

    #[test]
    fn theta_is_normalized_on_branch() {
        let a = reference_at(1.0);
        let w = a.branches[0].omega;
        let (c, s, den) = theta_parts(&a.cc, w);
        assert!(((c / den).powi(2) + (s / den).powi(2) - 1.0).abs() < 1e-9);
        let th = theta(&a.cc, w).unwrap();
        assert!((th.cos() - c / den).abs() < 1e-10);
        assert!((th.sin() - s / den).abs() < 1e-10);
    }

    #[test]
    fn theta_matches_complex_quotient() {
        for tau in [0.2, 1.0, 2.0, 2.85] {
            let a = reference_at(tau);
            let w = a.branches[0].omega;
            let iw = Complex64::new(0.0, w);
            let ratio = a.cc.p_at(iw) / a.cc.q_at(iw);
            let th = a.branches[0].theta;
            assert!((th.cos() + ratio.re).abs() < 1e-9, "{tau}");
            assert!((th.sin() - ratio.im).abs() < 1e-9, "{tau}");
        }
    }

    #[test]
    fn theta_atan2_convention() {
        // a4 = a5 = 0, a6 = 1 makes |Q|² = 1; choose a3 so that the cosine
        // numerator is -a3·a6 < 0 and the sine numerator vanishes at ω → 0.
        let mut cc = coeffs_with_b(0.0, 0.0, 0.0);
        cc.a6 = 1.0;
        cc.a3 = 2.0;
        let th = theta(&cc, 0.0).unwrap();
        assert_relative_eq!(th, PI);
    }

    #[test]
    fn degenerate_denominator() {
        let cc = coeffs_with_b(0.0, 0.0, 0.0);
        assert!(matches!(theta(&cc, 0.5), Err(Error::DegenerateDenominator { .. })));
    }

    #[test]
    fn sn_negative_at_zero_and_ordered() {
        let p = ModelParams::reference(0.0);
        for n in 0..4 {
            assert!(sn_value(&p, 0.0, n, 0).unwrap().unwrap() < 0.0);
        }
        for tau in [0.5, 1.0, 2.0] {
            let a = reference_at(tau);
            let b = a.branches[0];
            assert_relative_eq!(b.s_n(tau, 0) - b.s_n(tau, 1), TAU / b.omega, max_relative = 1e-12);
        }
    }

    #[test]
    fn sn_undefined_off_branch() {
        let p = ModelParams::reference(0.0);
        assert_eq!(sn_value(&p, 1.0, 0, 1).unwrap(), None);
        assert_eq!(sn_value(&p, 2.95, 0, 0).unwrap(), None);
        assert_eq!(sn_value(&p, 3.5, 0, 0).unwrap(), None);
    }

    #[test]
    fn residual_at_zero_is_a3_plus_a6() {
        let a = reference_at(1.0);
        let r = char_residual(&a.cc, Complex64::new(0.0, 0.0), 1.0);
        assert_relative_eq!(r.re, a.cc.a3 + a.cc.a6, max_relative = 1e-14);
        assert!(r.re > 0.0);
    }

    #[test]
    fn residual_factorizes_at_trivial_equilibrium() {
        use crate::equilibria::trivial_equilibrium;
        let p = ModelParams::reference(1.2);
        let lin = linearize(&p, &trivial_equilibrium(&p, 1.2));
        let cc = char_coeffs(&lin, p.mu, p.k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let l = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0));
            let direct = char_residual(&cc, l, 1.2);
            let factored = (l + p.mu) * (l + p.k) * (l + lin.a - lin.b * (-l * 1.2).exp());
            assert!((direct - factored).norm() < 1e-12 * (1.0 + factored.norm()));
        }
    }

    #[test]
    fn residual_conjugate_symmetry() {
        let a = reference_at(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let l = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let r = char_residual(&a.cc, l, 0.8);
            let rc = char_residual(&a.cc, l.conj(), 0.8);
            assert!((r.conj() - rc).norm() <= 1e-12 * (1.0 + r.norm()));
        }
    }

    #[test]
    fn partition_counts_crossings() {
        let mk = |t, d| SwitchReport {
            tau_star: t,
            omega_star: 1.0,
            n: 0,
            branch: 0,
            transversality: 0,
            direction: d,
            residual: 0.0,
            dh_dz: 1.0,
            ds_dtau: 1.0,
            refined: true,
        };
        let reports = [mk(1.0, Direction::Destabilizing), mk(2.0, Direction::Destabilizing), mk(2.5, Direction::Stabilizing)];
        let v: Vec<_> = partition(true, &reports, 3.0).iter().map(|i| i.verdict).collect();
        assert_eq!(v, [Stability::Stable, Stability::Unstable, Stability::Unstable, Stability::Unstable]);
        let reports = [mk(1.0, Direction::Unclassified), mk(2.0, Direction::Stabilizing)];
        let v: Vec<_> = partition(true, &reports, 3.0).iter().map(|i| i.verdict).collect();
        assert_eq!(v, [Stability::Stable, Stability::Unknown, Stability::Unknown]);
    }
}
