//! Method-of-steps integration with dense output, plus trajectory
//! post-processing.
//!
//! The stepper is classical RK4 on a uniform mesh `Δt = τ/m`, so every
//! multiple of `τ` is a mesh point and the lag `t - τ` of a mesh time is
//! again a mesh time. Lags of half-step stage times fall on segment
//! midpoints and are read from cubic Hermite interpolants built from the
//! stored states and derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::model::{Component, HillRates, ModelParams, RateFunctions, SystemState};

/// Default number of steps per delay interval.
pub const STEPS_PER_DELAY: usize = 64;
/// Step used when the delay is zero and no `max_step` is given.
pub const ODE_DEFAULT_STEP: f64 = 0.05;
/// Most negative component value accepted during integration.
pub const NEGATIVITY_LIMIT: f64 = -1e-6;

/// Initial data on `[-τ, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(SystemState),
    Function(Arc<dyn Fn(f64) -> SystemState + Send + Sync>),
}

impl History {
    pub fn function(f: impl Fn(f64) -> SystemState + Send + Sync + 'static) -> Self {
        History::Function(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> SystemState {
        match self {
            History::Constant(s) => *s,
            History::Function(f) => f(t),
        }
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(s) => f.debug_tuple("Constant").field(s).finish(),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Upper bound on the step; defaults to `τ/64` (or 0.05 when `τ = 0`).
    pub max_step: Option<f64>,
}

/// An immutable integrated solution with C¹ piecewise-cubic dense output.
#[derive(Debug, Clone)]
pub struct Trajectory<R = HillRates> {
    tau: f64,
    times: Vec<f64>,
    states: Vec<SystemState>,
    derivatives: Vec<SystemState>,
    params: ModelParams<R>,
    history: History,
}

impl<R: RateFunctions> Trajectory<R> {
    /// Assembles a trajectory from raw mesh data (for post-processing of
    /// externally produced series).
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<SystemState>,
        derivatives: Vec<SystemState>,
        params: ModelParams<R>,
        history: History,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() || times.len() != derivatives.len() {
            return Err(Error::InvalidState(format!(
                "mesh of {} times, {} states, {} derivatives",
                times.len(),
                states.len(),
                derivatives.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("mesh times are not strictly increasing".into()));
        }
        Ok(Self { tau: params.tau, times, states, derivatives, params, history })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn derivatives(&self) -> &[SystemState] {
        &self.derivatives
    }

    pub fn params(&self) -> &ModelParams<R> {
        &self.params
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty mesh")
    }

    pub fn final_state(&self) -> SystemState {
        *self.states.last().expect("nonempty mesh")
    }

    /// Values of one component at the mesh points.
    pub fn component(&self, c: Component) -> Vec<f64> {
        self.states.iter().map(|s| s.get(c)).collect()
    }

    /// Dense output on `[t₀ - τ, t_end]`.
    pub fn interpolate(&self, t: f64) -> Result<SystemState> {
        let (lo, hi) = (self.t_start() - self.tau, self.t_end());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        if t < self.t_start() || (self.tau > 0.0 && t == self.t_start()) {
            return Ok(self.history.at(t - self.t_start()));
        }
        let j = self.times.partition_point(|&x| x <= t);
        if self.times[j - 1] == t {
            return Ok(self.states[j - 1]);
        }
        Ok(self.hermite(j - 1, t))
    }

    fn hermite(&self, i: usize, t: f64) -> SystemState {
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        hermite(
            self.states[i],
            self.derivatives[i],
            self.states[i + 1],
            self.derivatives[i + 1],
            h,
            (t - t0) / h,
        )
    }

    /// Smallest component value and largest E over the mesh, with the bound
    /// `E ≤ max(E(0), f(0)/k)`.
    pub fn invariants(&self) -> InvariantReport {
        let mut min_value = f64::INFINITY;
        let mut min_component = Component::Q;
        let mut max_e = f64::NEG_INFINITY;
        for s in &self.states {
            let (c, v) = s.min_component();
            if v < min_value {
                min_value = v;
                min_component = c;
            }
            max_e = max_e.max(s.e);
        }
        let e_bound = self.states[0].e.max(self.params.rates.f(0.0) / self.params.k);
        InvariantReport { min_value, min_component, max_e, e_bound }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub min_value: f64,
    pub min_component: Component,
    pub max_e: f64,
    pub e_bound: f64,
}

impl InvariantReport {
    pub fn nonnegative(&self) -> bool {
        self.min_value >= -1e-9
    }

    pub fn e_bounded(&self) -> bool {
        self.max_e <= self.e_bound * (1.0 + 1e-9) + 1e-9
    }

    pub fn holds(&self) -> bool {
        self.nonnegative() && self.e_bounded()
    }
}

/// Cubic Hermite on a segment of length `h` at local coordinate `s ∈ [0,1]`.
#[inline]
fn hermite(
    y0: SystemState,
    f0: SystemState,
    y1: SystemState,
    f1: SystemState,
    h: f64,
    s: f64,
) -> SystemState {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + f0 * (h * h10) + y1 * h01 + f1 * (h * h11)
}

/// Integrates from `t = 0` to `t_end` with initial data `history`.
pub fn integrate<R: RateFunctions + Clone>(
    p: &ModelParams<R>,
    history: History,
    t_end: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory<R>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Domain(format!("t_end = {t_end}")));
    }
    let tau = p.tau;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau = {tau}")));
    }
    if let Some(h) = opts.max_step {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("max_step = {h}")));
        }
    }

    let (dt, m) = if tau > 0.0 {
        let cap = opts.max_step.unwrap_or(tau / STEPS_PER_DELAY as f64);
        let m = ((tau / cap) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (tau / m as f64, m)
    } else {
        (opts.max_step.unwrap_or(ODE_DEFAULT_STEP), 0)
    };

    let full_steps = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    let tail = t_end - full_steps as f64 * dt;
    let has_tail = tail > 1e-9 * dt;
    let n_steps = full_steps + usize::from(has_tail);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut derivs: Vec<SystemState> = Vec::with_capacity(n_steps + 1);

    let y0 = history.at(0.0);
    if !y0.is_finite() {
        return Err(Error::InvalidState(format!("history at 0 is {y0:?}")));
    }
    times.push(0.0);
    states.push(y0);

    // Delayed state at mesh index i - m, or at the midpoint of that segment.
    let history_ref = &history;
    let lag_mesh = |states: &[SystemState], i: usize| -> SystemState {
        if i >= m {
            states[i - m]
        } else {
            history_ref.at((i as f64 - m as f64) * dt)
        }
    };
    let lag_general = |states: &[SystemState], derivs: &[SystemState], s: f64| -> SystemState {
        if s <= 0.0 {
            return history_ref.at(s);
        }
        let j = ((s / dt).floor() as usize).min(states.len() - 2);
        let local = (s - j as f64 * dt) / dt;
        hermite(states[j], derivs[j], states[j + 1], derivs[j + 1], dt, local)
    };

    let f = |y: SystemState, d: SystemState| p.rhs_unchecked(y, d);
    derivs.push(if m > 0 { f(y0, lag_mesh(&states, 0)) } else { f(y0, y0) });

    for i in 0..n_steps {
        let t = i as f64 * dt;
        let h = if i < full_steps { dt } else { tail };
        let y = states[i];
        let k1 = derivs[i];
        let next = if m == 0 {
            let k2 = {
                let s = y + k1 * (0.5 * h);
                f(s, s)
            };
            let k3 = {
                let s = y + k2 * (0.5 * h);
                f(s, s)
            };
            let k4 = {
                let s = y + k3 * h;
                f(s, s)
            };
            y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        } else {
            let (d_half, d_full) = if i < full_steps {
                let mid = if i + 1 > m {
                    let j = i - m;
                    hermite(states[j], derivs[j], states[j + 1], derivs[j + 1], dt, 0.5)
                } else {
                    history.at((i as f64 + 0.5 - m as f64) * dt)
                };
                (mid, lag_mesh(&states, i + 1))
            } else {
                (
                    lag_general(&states, &derivs, t + 0.5 * h - tau),
                    lag_general(&states, &derivs, t + h - tau),
                )
            };
            let k2 = f(y + k1 * (0.5 * h), d_half);
            let k3 = f(y + k2 * (0.5 * h), d_half);
            let k4 = f(y + k3 * h, d_full);
            y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        };
        let t_next = if i + 1 < full_steps || !has_tail && i + 1 == full_steps {
            (i + 1) as f64 * dt
        } else {
            t_end
        };

        if !next.is_finite() {
            return Err(Error::Divergence { last_valid_time: t });
        }
        let (c, v) = next.min_component();
        if v < NEGATIVITY_LIMIT {
            return Err(Error::InvariantViolation { time: t_next, component: c.name(), value: v });
        }
        let d_next = if m == 0 {
            f(next, next)
        } else if i + 1 < full_steps || !has_tail && i + 1 == full_steps {
            f(next, lag_mesh(&states, i + 1))
        } else {
            f(next, lag_general(&states, &derivs, t_end - tau))
        };
        times.push(t_next);
        states.push(next);
        derivs.push(d_next);
    }

    Ok(Trajectory { tau, times, states, derivatives: derivs, params: p.clone(), history })
}

/// Standalone form of [`Trajectory::interpolate`].
pub fn interpolate<R: RateFunctions>(traj: &Trajectory<R>, t: f64) -> Result<SystemState> {
    traj.interpolate(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    /// Mean peak-to-peak interval.
    pub mean: f64,
    pub std_dev: f64,
    /// Last over first cycle amplitude (peak minus following trough).
    pub amplitude_ratio: f64,
    /// Amplitude of the last complete cycle.
    pub amplitude: f64,
    pub peaks: Vec<f64>,
}

/// Vertex of the parabola through three points, or the middle point when
/// they are collinear.
fn parabola_vertex(t: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d01 = (y[1] - y[0]) / (t[1] - t[0]);
    let d12 = (y[2] - y[1]) / (t[2] - t[1]);
    let c = (d12 - d01) / (t[2] - t[0]);
    if c == 0.0 {
        return (t[1], y[1]);
    }
    let b = d01 - c * (t[0] + t[1]);
    let tv = -b / (2.0 * c);
    let yv = y[0] + (tv - t[0]) * (d01 + c * (tv - t[1]));
    if tv >= t[0] && tv <= t[2] {
        (tv, yv)
    } else {
        (t[1], y[1])
    }
}

/// Refined peak times and cycle heights (peak minus the lowest value before
/// the next peak) of a sampled series after `t_transient`. The last peak has
/// no complete cycle and carries no height.
pub fn cycles(times: &[f64], values: &[f64], t_transient: f64) -> (Vec<f64>, Vec<f64>) {
    let start = times.partition_point(|&t| t < t_transient).max(1);
    if times.len() < start + 2 {
        return (Vec::new(), Vec::new());
    }
    let scale = values[start..].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min_height = 1e-8 * scale.max(f64::MIN_POSITIVE);

    let raw: Vec<usize> = (start..times.len() - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect();
    let mut peaks = Vec::new();
    let mut heights = Vec::new();
    for (k, &i) in raw.iter().enumerate() {
        let vertex = || {
            parabola_vertex(
                [times[i - 1], times[i], times[i + 1]],
                [values[i - 1], values[i], values[i + 1]],
            )
            .0
        };
        match raw.get(k + 1) {
            Some(&next) => {
                let trough = values[i..=next].iter().copied().fold(f64::INFINITY, f64::min);
                let height = values[i] - trough;
                if height >= min_height {
                    peaks.push(vertex());
                    heights.push(height);
                }
            }
            None if !peaks.is_empty() => peaks.push(vertex()),
            None => {}
        }
    }
    (peaks, heights)
}

/// Period of a sampled series after `t_transient`, from strict local maxima
/// refined by a parabola through each mesh triple.
pub fn detect_period_series(times: &[f64], values: &[f64], t_transient: f64) -> Option<PeriodEstimate> {
    let (peaks, heights) = cycles(times, values, t_transient);
    if peaks.len() < 3 || heights.len() < 2 {
        return None;
    }
    let first = heights[0];
    let last = *heights.last().unwrap();
    if !(first > 0.0) {
        return None;
    }
    let amplitude_ratio = last / first;
    if amplitude_ratio < 0.2 {
        return None;
    }
    let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<f64>() / n;
    let var = if intervals.len() > 1 {
        intervals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(PeriodEstimate { mean, std_dev: var.sqrt(), amplitude_ratio, amplitude: last, peaks })
}

pub fn detect_period<R: RateFunctions>(
    traj: &Trajectory<R>,
    component: Component,
    t_transient: f64,
) -> Option<PeriodEstimate> {
    detect_period_series(traj.times(), &traj.component(component), t_transient)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Asymptotics {
    Converging,
    SustainedOscillation,
    Diverging,
    Unclassified,
}

impl Asymptotics {
    pub fn as_str(self) -> &'static str {
        match self {
            Asymptotics::Converging => "converging",
            Asymptotics::SustainedOscillation => "sustained-oscillation",
            Asymptotics::Diverging => "diverging",
            Asymptotics::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for Asymptotics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Largest componentwise relative distance from `eq`.
fn deviation(s: &SystemState, eq: &SystemState) -> f64 {
    Component::ALL
        .iter()
        .map(|&c| {
            let r = eq.get(c).abs().max(1e-12);
            (s.get(c) - eq.get(c)).abs() / r
        })
        .fold(0.0, f64::max)
}

/// Long-run behaviour after `t_transient`:
/// converging when the deviation from `eq` over the last 10% of the window is
/// below 5% of that over the first 10%; sustained when Q has a period with
/// amplitude ratio in [0.8, 1.25]; diverging when the maxima over ten
/// segments grow monotonically past ten times the first.
pub fn classify_asymptotics<R: RateFunctions>(
    traj: &Trajectory<R>,
    eq: &Equilibrium,
    t_transient: f64,
) -> Asymptotics {
    let times = traj.times();
    let start = times.partition_point(|&t| t < t_transient);
    let n = times.len() - start;
    if n < 20 {
        return Asymptotics::Unclassified;
    }
    let dev: Vec<f64> = traj.states()[start..].iter().map(|s| deviation(s, &eq.state)).collect();
    let tenth = n / 10;
    let first = dev[..tenth].iter().copied().fold(0.0, f64::max);
    let last = dev[n - tenth..].iter().copied().fold(0.0, f64::max);
    if last < 0.05 * first || (first <= 1e-12 && last <= 1e-12) {
        return Asymptotics::Converging;
    }
    if let Some(est) = detect_period(traj, Component::Q, t_transient) {
        if (0.8..=1.25).contains(&est.amplitude_ratio) {
            return Asymptotics::SustainedOscillation;
        }
    }
    let maxima: Vec<f64> = dev
        .chunks(n.div_ceil(10))
        .map(|c| c.iter().copied().fold(0.0, f64::max))
        .collect();
    if maxima.windows(2).all(|w| w[1] > w[0]) && *maxima.last().unwrap() > 10.0 * maxima[0] {
        return Asymptotics::Diverging;
    }
    Asymptotics::Unclassified
}
