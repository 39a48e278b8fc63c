use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use hemadyn::dde::{
    classify_asymptotics, cycles, detect_period, integrate, Asymptotics, History, IntegrateOptions, Trajectory,
};
use hemadyn::equilibria::{delay_grid, positive_equilibrium, tau_max, trivial_equilibrium, Equilibrium};
use hemadyn::model::{check_derivatives, Component, HillRates, ModelParams, RateFunctions, SampleBox, SystemState};
use hemadyn::switch::{analyze_delay, scan, Direction, ScanResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{CliError, ConfigError};
use crate::output::{num, Check, OutputSet, RunManifest};

/// Delay span used for equilibrium output when no positive equilibrium
/// bounds it and the config sets no `run.tau_end`.
pub const FALLBACK_TAU_END: f64 = 5.0;

/// Initial data for a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistorySpec {
    Constant(SystemState),
    /// The positive equilibrium at the run's delay, scaled componentwise.
    Equilibrium(f64),
}

impl FromStr for HistorySpec {
    type Err = String;

    /// `q,m,e` or `equilibrium` or `equilibrium*FACTOR`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("equilibrium") {
            let factor = match rest.trim() {
                "" => 1.0,
                r => r
                    .strip_prefix('*')
                    .and_then(|f| f.trim().parse::<f64>().ok())
                    .ok_or_else(|| format!("expected equilibrium*FACTOR, got {s:?}"))?,
            };
            if !(factor >= 0.0 && factor.is_finite()) {
                return Err(format!("factor {factor} must be finite and >= 0"));
            }
            return Ok(HistorySpec::Equilibrium(factor));
        }
        let parts: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("expected Q,M,E or equilibrium*FACTOR, got {s:?}"))?;
        match parts[..] {
            [q, m, e] if parts.iter().all(|x| *x >= 0.0 && x.is_finite()) => {
                Ok(HistorySpec::Constant(SystemState::new(q, m, e)))
            }
            _ => Err(format!("expected three finite nonnegative values, got {s:?}")),
        }
    }
}

impl HistorySpec {
    fn resolve(&self, eq: Option<&Equilibrium>) -> Result<SystemState, ConfigError> {
        match (self, eq) {
            (HistorySpec::Constant(s), _) => Ok(*s),
            (HistorySpec::Equilibrium(f), Some(eq)) => Ok(eq.state * *f),
            (HistorySpec::Equilibrium(_), None) => Err(ConfigError::Flag {
                flag: "--history",
                message: "no positive equilibrium at this delay; give Q,M,E explicitly".into(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub tau: f64,
    pub t_end: f64,
    pub transient: f64,
    pub max_step: Option<f64>,
    pub history: Option<HistorySpec>,
    pub stride: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub tau_from: f64,
    pub tau_to: Option<f64>,
    pub tau_step: f64,
    pub t_end: f64,
    pub transient: f64,
    pub max_step: Option<f64>,
    pub history: Option<HistorySpec>,
    pub out: Option<PathBuf>,
}

/// Shared state of one invocation.
pub struct Session {
    pub config: Config,
    pub seed: u64,
    pub outputs: OutputSet,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub results: BTreeMap<String, Value>,
    started: Instant,
}

impl Session {
    pub fn new(config: Config, out_dir: &Path, seed: u64) -> Result<Self, CliError> {
        Ok(Self {
            config,
            seed,
            outputs: OutputSet::new(out_dir)?,
            checks: Vec::new(),
            notes: Vec::new(),
            results: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    fn params(&self) -> &ModelParams<HillRates> {
        &self.config.params
    }

    fn check(&mut self, name: &str, passed: bool, detail: String, reference: bool) {
        self.checks.push(Check { name: name.to_string(), passed, detail, reference });
    }

    fn note(&mut self, s: impl Into<String>) {
        let s = s.into();
        println!("note: {s}");
        self.notes.push(s);
    }

    pub fn finish(self, subcommand: &str) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config_source: self.config.source.clone(),
            config_hash: self.config.hash.clone(),
            parameters: self.config.params.clone(),
            run: self.config.run.clone(),
            seed: self.seed,
            outputs: self.outputs.files().to_vec(),
            checks: self.checks,
            notes: self.notes,
            results: self.results,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        manifest.write(self.outputs.dir())?;
        Ok(manifest)
    }

    fn tau_max(&self) -> Option<f64> {
        tau_max(self.params())
    }

    /// Delay grid `[0, end)` for equilibrium output.
    fn equilibrium_grid(&self) -> Vec<f64> {
        let end = self.config.run.tau_end.unwrap_or_else(|| match self.tau_max() {
            Some(t) if t.is_finite() => t,
            _ => FALLBACK_TAU_END,
        });
        delay_grid(end, self.config.run.grid_step)
    }

    /// Delay grid `[0, τ_max)` over which a positive equilibrium exists.
    fn positive_grid(&self) -> Option<Vec<f64>> {
        let end = match self.tau_max()? {
            t if t.is_finite() => t,
            _ => self.config.run.tau_end.unwrap_or(FALLBACK_TAU_END),
        };
        Some(delay_grid(end, self.config.run.grid_step))
    }
}

fn equilibrium_at(p: &ModelParams<HillRates>, tau: f64) -> Result<Option<Equilibrium>, CliError> {
    Ok(positive_equilibrium(p, tau)?)
}

pub fn equilibria(s: &mut Session) -> Result<(), CliError> {
    equilibria_to(s, "equilibria.csv")?;
    if let Some(tm) = s.tau_max() {
        println!("tau_max = {tm}");
        s.results.insert("tau_max".into(), json!(tm));
    }
    Ok(())
}

pub const COEFF_COLUMNS: [&str; 16] =
    ["tau", "A", "B", "C", "D", "G", "H", "a1", "a2", "a3", "a4", "a5", "a6", "b1", "b2", "b3"];

pub fn coeffs(s: &mut Session) -> Result<(), CliError> {
    coeffs_to(s, "coefficients.csv")
}

fn coeffs_to(s: &mut Session, name: &str) -> Result<(), CliError> {
    let Some(grid) = s.positive_grid() else {
        s.note("no positive equilibrium for any delay: coefficients skipped");
        return Ok(());
    };
    let p = s.params().clone();
    let analyses = grid
        .par_iter()
        .map(|&t| analyze_delay(&p, t))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<String>> = analyses
        .iter()
        .flatten()
        .map(|a| {
            let l = a.lin;
            let c = a.cc;
            [a.tau, l.a, l.b, l.c, l.d, l.g, l.h, c.a1, c.a2, c.a3, c.a4, c.a5, c.a6, c.b1, c.b2, c.b3]
                .iter()
                .map(|x| num(*x))
                .collect()
        })
        .collect();
    s.outputs.write_csv(Path::new(name), &COEFF_COLUMNS, &rows)?;
    Ok(())
}

pub const S_CURVE_COLUMNS: [&str; 4] = ["tau", "n", "branch", "S_value"];
pub const SWITCH_COLUMNS: [&str; 6] = ["tau_star", "omega_star", "n", "transversality", "direction", "residual"];
pub const PARTITION_COLUMNS: [&str; 3] = ["start", "end", "verdict"];

pub fn scan_cmd(s: &mut Session) -> Result<Option<ScanResult>, CliError> {
    scan_to(s, "s_curves.csv", "switches.csv", "partition.csv")
}

fn scan_to(s: &mut Session, curves: &str, switches: &str, partition: &str) -> Result<Option<ScanResult>, CliError> {
    let Some(grid) = s.positive_grid() else {
        s.note("no positive equilibrium for any delay: scan skipped");
        return Ok(None);
    };
    let res = scan(s.params(), &grid, s.config.run.n_max)?;

    let mut rows = Vec::new();
    for c in &res.curves {
        for (tau, v) in &c.samples {
            rows.push(vec![num(*tau), c.n.to_string(), c.branch.to_string(), num(*v)]);
        }
    }
    s.outputs.write_csv(Path::new(curves), &S_CURVE_COLUMNS, &rows)?;

    let rows: Vec<Vec<String>> = res
        .reports
        .iter()
        .map(|r| {
            vec![
                num(r.tau_star),
                num(r.omega_star),
                r.n.to_string(),
                r.transversality.to_string(),
                r.direction.as_str().to_string(),
                num(r.residual),
            ]
        })
        .collect();
    s.outputs.write_csv(Path::new(switches), &SWITCH_COLUMNS, &rows)?;

    let rows: Vec<Vec<String>> = res
        .partition
        .iter()
        .map(|iv| vec![num(iv.start), num(iv.end), iv.verdict.as_str().to_string()])
        .collect();
    s.outputs.write_csv(Path::new(partition), &PARTITION_COLUMNS, &rows)?;

    for r in &res.reports {
        println!(
            "crossing at tau* = {} (omega* = {}, n = {}): {}",
            r.tau_star,
            r.omega_star,
            r.n,
            r.direction.as_str()
        );
    }
    for iv in &res.partition {
        println!("[{}, {}): {}", iv.start, iv.end, iv.verdict.as_str());
    }

    s.results.insert("tau_max".into(), json!(res.tau_max));
    s.results.insert("root_window".into(), json!(res.root_window));
    s.results.insert(
        "crossings".into(),
        json!(res
            .reports
            .iter()
            .map(|r| json!({
                "tau_star": r.tau_star,
                "omega_star": r.omega_star,
                "n": r.n,
                "direction": r.direction.as_str(),
                "residual": r.residual,
            }))
            .collect::<Vec<_>>()),
    );
    s.results.insert(
        "partition".into(),
        json!(res
            .partition
            .iter()
            .map(|iv| json!({ "start": iv.start, "end": iv.end, "verdict": iv.verdict.as_str() }))
            .collect::<Vec<_>>()),
    );
    Ok(Some(res))
}

pub const TRAJECTORY_COLUMNS: [&str; 4] = ["t", "Q", "M", "E"];

fn trajectory_rows(tr: &Trajectory, stride: usize) -> Vec<Vec<String>> {
    let n = tr.times().len();
    (0..n)
        .filter(|i| i % stride == 0 || *i == n - 1)
        .map(|i| {
            let st = tr.states()[i];
            vec![num(tr.times()[i]), num(st.q), num(st.m), num(st.e)]
        })
        .collect()
}

struct RunSummary {
    verdict: Asymptotics,
    period: Option<f64>,
    amplitude: Option<f64>,
}

fn summarize(tr: &Trajectory, eq: &Equilibrium, transient: f64) -> RunSummary {
    let est = detect_period(tr, Component::Q, transient);
    let amplitude = est.as_ref().map(|e| e.amplitude).or_else(|| {
        let (_, h) = cycles(tr.times(), &tr.component(Component::Q), transient);
        h.last().copied()
    });
    RunSummary {
        verdict: classify_asymptotics(tr, eq, transient),
        period: est.map(|e| e.mean),
        amplitude,
    }
}

fn run_one(
    p: &ModelParams<HillRates>,
    tau: f64,
    history: HistorySpec,
    t_end: f64,
    max_step: Option<f64>,
) -> Result<(Trajectory, Equilibrium), CliError> {
    let p = p.with_tau(tau);
    let eq = equilibrium_at(&p, tau)?;
    let start = history.resolve(eq.as_ref())?;
    let tr = integrate(&p, History::Constant(start), t_end, IntegrateOptions { max_step })?;
    Ok((tr, eq.unwrap_or_else(|| trivial_equilibrium(&p, tau))))
}

fn check_flag(flag: &'static str, ok: bool, message: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Flag { flag, message: message.to_string() }.into())
    }
}

pub fn simulate(s: &mut Session, o: &SimulateOptions) -> Result<(), CliError> {
    check_flag("--tau", o.tau >= 0.0 && o.tau.is_finite(), "must be finite and >= 0")?;
    check_flag("--t-end", o.t_end > 0.0 && o.t_end.is_finite(), "must be finite and > 0")?;
    check_flag("--transient", o.transient >= 0.0 && o.transient < o.t_end, "must lie in [0, t_end)")?;
    check_flag("--max-step", o.max_step.is_none_or(|h| h > 0.0 && h.is_finite()), "must be finite and > 0")?;
    check_flag("--stride", o.stride != Some(0), "must be >= 1")?;

    let history = o.history.unwrap_or(HistorySpec::Equilibrium(s.config.run.history_factor));
    let (tr, eq) = run_one(s.params(), o.tau, history, o.t_end, o.max_step)?;
    let stride = o.stride.unwrap_or(s.config.run.output_stride);
    let name = o.out.clone().unwrap_or_else(|| PathBuf::from(format!("simulation_tau{}.csv", o.tau)));
    s.outputs.write_csv(&name, &TRAJECTORY_COLUMNS, &trajectory_rows(&tr, stride))?;

    let inv = tr.invariants();
    s.check(
        "trajectory nonnegativity and E bound",
        inv.holds(),
        format!("min {} = {}, max E = {} (bound {})", inv.min_component, inv.min_value, inv.max_e, inv.e_bound),
        false,
    );
    let sum = summarize(&tr, &eq, o.transient);
    println!(
        "tau = {}: {} against the {} equilibrium, period {}",
        o.tau,
        sum.verdict,
        eq.kind.as_str(),
        sum.period.map_or("none".into(), num)
    );
    s.results.insert(
        "simulation".into(),
        json!({
            "tau": o.tau,
            "verdict": sum.verdict.as_str(),
            "period": sum.period,
            "amplitude": sum.amplitude,
            "mesh_points": tr.times().len(),
        }),
    );
    Ok(())
}

pub const SWEEP_COLUMNS: [&str; 4] = ["tau", "verdict", "period", "amplitude"];

pub fn sweep(s: &mut Session, o: &SweepOptions) -> Result<(), CliError> {
    check_flag("--tau-step", o.tau_step > 0.0 && o.tau_step.is_finite(), "must be finite and > 0")?;
    check_flag("--tau-from", o.tau_from >= 0.0 && o.tau_from.is_finite(), "must be finite and >= 0")?;
    check_flag("--t-end", o.t_end > 0.0 && o.t_end.is_finite(), "must be finite and > 0")?;
    check_flag("--transient", o.transient >= 0.0 && o.transient < o.t_end, "must lie in [0, t_end)")?;
    let to = match (o.tau_to, s.tau_max()) {
        (Some(t), _) => t,
        (None, Some(tm)) if tm.is_finite() => tm,
        _ => {
            return Err(ConfigError::Flag { flag: "--tau-to", message: "required when tau_max is unbounded or absent".into() }
                .into())
        }
    };
    let count = ((to - o.tau_from) / o.tau_step * (1.0 + 1e-12)).floor();
    let taus: Vec<f64> = (0..=count.max(-1.0) as i64)
        .map(|i| o.tau_from + i as f64 * o.tau_step)
        .filter(|&t| t < to || o.tau_to.is_some())
        .collect();
    let history = o.history.unwrap_or(HistorySpec::Equilibrium(s.config.run.history_factor));

    let p = s.params().clone();
    let runs: Vec<(f64, RunSummary, bool)> = taus
        .par_iter()
        .map(|&tau| {
            let (tr, eq) = run_one(&p, tau, history, o.t_end, o.max_step)?;
            Ok((tau, summarize(&tr, &eq, o.transient), tr.invariants().holds()))
        })
        .collect::<Result<_, CliError>>()?;

    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|(tau, r, _)| vec![num(*tau), r.verdict.as_str().to_string(), opt(r.period), opt(r.amplitude)])
        .collect();
    let name = o.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    s.outputs.write_csv(&name, &SWEEP_COLUMNS, &rows)?;
    let bad: Vec<String> = runs.iter().filter(|r| !r.2).map(|r| num(r.0)).collect();
    s.check(
        "trajectory nonnegativity and E bound",
        bad.is_empty(),
        if bad.is_empty() { "all runs".into() } else { format!("violated at tau = {}", bad.join(", ")) },
        false,
    );
    Ok(())
}

/// Simulations reproduced by `reproduce`: (file, τ, t_end, transient).
pub const FIGURE_RUNS: [(&str, f64, f64, f64); 4] = [
    ("fig5_tau0.5.csv", 0.5, 1200.0, 400.0),
    ("fig6_tau1.4.csv", 1.4, 1200.0, 400.0),
    ("fig7_tau2.8.csv", 2.8, 2500.0, 800.0),
    ("fig8_tau2.9.csv", 2.9, 2500.0, 800.0),
];

pub fn reproduce(s: &mut Session) -> Result<(), CliError> {
    let p = s.params().clone();
    let reference = s.config.is_reference();

    // Rate derivatives at seeded random points.
    let e0 = p.rates.f(0.0) / p.k;
    let eq0 = equilibrium_at(&p, 0.0)?;
    let scale = eq0.map_or(SystemState::new(10.0, 10.0, e0), |e| e.state);
    let bounds = SampleBox { q_max: 2.0 * scale.q, m_max: 2.0 * scale.m, e_max: 2.0 * e0.max(scale.e) };
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mismatches = check_derivatives(&p.rates, bounds, 100, &mut rng);
    s.check(
        "rate derivatives match central differences",
        mismatches.is_empty(),
        format!("{} mismatches at 100 points (seed {})", mismatches.len(), s.seed),
        false,
    );

    equilibria_to(s, "fig1_equilibria.csv")?;
    coeffs_to(s, "fig2_coefficients.csv")?;
    let Some(res) = scan_to(s, "fig3_4_s_curves.csv", "switches.csv", "partition.csv")? else {
        s.note("no positive equilibrium: simulations skipped");
        return Ok(());
    };

    if let Some(grid) = s.positive_grid() {
        let worst = grid
            .iter()
            .filter_map(|&t| positive_equilibrium(&p, t).ok().flatten())
            .map(|eq| eq.steady_state_residual(&p).abs())
            .fold(0.0, f64::max);
        s.check("equilibrium residuals below 1e-9", worst < 1e-9, format!("worst {worst:e}"), false);
    }
    let worst = res.reports.iter().map(|r| r.residual).fold(0.0, f64::max);
    s.check(
        "characteristic residual at crossings below 1e-8",
        worst < 1e-8,
        format!("{} crossings, worst {worst:e}", res.reports.len()),
        false,
    );
    s.check(
        "crossings refined to |S_n| < 1e-10",
        res.reports.iter().all(|r| r.refined),
        String::new(),
        false,
    );

    let tm = res.tau_max;
    let history = HistorySpec::Equilibrium(s.config.run.history_factor);
    let stride = s.config.run.output_stride;
    let runs: Vec<_> = FIGURE_RUNS
        .par_iter()
        .filter(|(_, tau, _, _)| *tau < tm)
        .map(|&(name, tau, t_end, transient)| {
            let (tr, eq) = run_one(&p, tau, history, t_end, None)?;
            Ok((name, tau, summarize(&tr, &eq, transient), tr.invariants(), trajectory_rows(&tr, stride)))
        })
        .collect::<Result<_, CliError>>()?;
    for (name, tau, _, _) in FIGURE_RUNS.iter().filter(|r| r.1 >= tm) {
        s.note(format!("{name}: tau = {tau} is beyond tau_max = {tm}; skipped"));
    }
    let mut sims = Vec::new();
    for (name, tau, sum, inv, rows) in &runs {
        s.outputs.write_csv(Path::new(name), &TRAJECTORY_COLUMNS, rows)?;
        s.check(
            &format!("trajectory nonnegativity and E bound at tau = {tau}"),
            inv.holds(),
            format!("min {} = {:e}, max E = {} (bound {})", inv.min_component, inv.min_value, inv.max_e, inv.e_bound),
            false,
        );
        sims.push(json!({
            "tau": tau,
            "verdict": sum.verdict.as_str(),
            "period": sum.period,
            "amplitude": sum.amplitude,
        }));
    }
    s.results.insert("simulations".into(), json!(sims));

    if reference {
        reference_checks(s, &res, &runs.iter().map(|r| (r.1, r.2.verdict, r.2.period)).collect::<Vec<_>>())?;
    } else {
        s.note("parameters differ from the reference set: reference checks skipped");
    }
    Ok(())
}

fn equilibria_to(s: &mut Session, name: &str) -> Result<(), CliError> {
    let p = s.params().clone();
    let grid = s.equilibrium_grid();
    let rows = grid
        .iter()
        .map(|&tau| {
            let eq = equilibrium_at(&p, tau)?.unwrap_or_else(|| trivial_equilibrium(&p, tau));
            let SystemState { q, m, e } = eq.state;
            Ok(vec![num(tau), num(q), num(m), num(e), eq.kind.as_str().to_string()])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    s.outputs.write_csv(Path::new(name), &["tau", "Qstar", "Mstar", "Estar", "kind"], &rows)?;
    if s.tau_max().is_none() {
        s.note("no positive equilibrium for any delay: trivial equilibrium only");
    }
    Ok(())
}

/// Published values for the reference set.
fn reference_checks(
    s: &mut Session,
    res: &ScanResult,
    sims: &[(f64, Asymptotics, Option<f64>)],
) -> Result<(), CliError> {
    let p = s.params().clone();
    let tm = res.tau_max;
    s.check("tau_max = 2.99 +- 0.01", (tm - 2.99).abs() <= 0.01, format!("{tm}"), true);

    let e0 = p.rates.f(0.0) / p.k;
    let near = equilibrium_at(&p, tm - 1e-6)?.map_or(SystemState::new(0.0, 0.0, e0), |e| e.state);
    let dist = SystemState::new(near.q, near.m, near.e - e0).norm_inf();
    s.check(
        "equilibrium within 1e-3 of (0, 0, f(0)/k) at tau_max - 1e-6, f(0)/k = 2346.4 +- 0.5",
        dist <= 1e-3 && (e0 - 2346.4).abs() <= 0.5,
        format!("state ({}, {}, {}), distance {dist}, f(0)/k = {e0}", near.q, near.m, near.e),
        true,
    );

    let w = &res.root_window;
    let signs = delay_grid(2.9 + 1e-12, s.config.run.grid_step)
        .iter()
        .map(|&t| analyze_delay(&p, t).map(|a| a.is_some_and(|a| a.cc.b2 > 0.0 && a.cc.b3 < 0.0)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .all(|x| x);
    s.check(
        "root window [0, 2.92 +- 0.01), b2 > 0 and b3 < 0 on [0, 2.9]",
        w.len() == 1 && w[0].0 == 0.0 && (w[0].1 - 2.92).abs() <= 0.01 && signs,
        format!("window {w:?}, signs {signs}"),
        true,
    );

    let r = &res.reports;
    let s1_rootless = res.curves.iter().filter(|c| c.n == 1).all(|c| c.roots.is_empty());
    s.check(
        "two crossings: 1.40 +- 0.05 destabilizing, 2.82 +- 0.02 stabilizing, S_1 rootless",
        r.len() == 2
            && (r[0].tau_star - 1.40).abs() <= 0.05
            && r[0].direction == Direction::Destabilizing
            && (r[1].tau_star - 2.82).abs() <= 0.02
            && r[1].direction == Direction::Stabilizing
            && s1_rootless,
        r.iter().map(|x| format!("{} {}", x.tau_star, x.direction.as_str())).collect::<Vec<_>>().join(", "),
        true,
    );

    let want = [
        (0.5, Asymptotics::Converging, None),
        (1.4, Asymptotics::SustainedOscillation, Some((100.0, 15.0))),
        (2.8, Asymptotics::SustainedOscillation, Some((220.0, 25.0))),
        (2.9, Asymptotics::Converging, None),
    ];
    for (tau, verdict, period) in want {
        let got = sims.iter().find(|x| x.0 == tau);
        s.check(
            &format!("tau = {tau} classifies as {verdict}"),
            got.is_some_and(|g| g.1 == verdict),
            got.map_or("not simulated".into(), |g| g.1.to_string()),
            true,
        );
        if let Some((target, tol)) = period {
            let got_period = got.and_then(|g| g.2);
            s.check(
                &format!("period at tau = {tau} is {target} +- {tol} days"),
                got_period.is_some_and(|x| (x - target).abs() <= tol),
                got_period.map_or("none".into(), num),
                true,
            );
        }
    }
    Ok(())
}
