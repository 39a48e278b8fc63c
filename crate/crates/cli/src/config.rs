//! TOML run configuration.
//!
//! ```toml
//! [model]
//! delta = 0.01
//! gamma = 0.2
//! mu = 0.02
//! k = 2.8
//!
//! [hill]
//! beta0 = 0.5
//! G = 0.04
//! a = 6570.0
//! K = 0.0382
//! r = 7.0
//!
//! [run]            # optional
//! grid_step = 0.005
//! n_max = 3
//! history_factor = 1.1
//! output_stride = 16
//! tau_end = 3.0
//! ```

use std::fmt;
use std::path::Path;

use hemadyn::model::{validate, HillRates, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::ConfigError;

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

pub const DEFAULT_GRID_STEP: f64 = 0.005;
pub const DEFAULT_N_MAX: u32 = 3;
pub const DEFAULT_HISTORY_FACTOR: f64 = 1.1;
pub const DEFAULT_OUTPUT_STRIDE: usize = 16;

type Field<T> = Option<Spanned<T>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    hill: Option<RawHill>,
    run: Option<RawRun>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    delta: Field<f64>,
    gamma: Field<f64>,
    mu: Field<f64>,
    k: Field<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawHill {
    beta0: Field<f64>,
    G: Field<f64>,
    a: Field<f64>,
    K: Field<f64>,
    r: Field<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    grid_step: Field<f64>,
    n_max: Field<u32>,
    history_factor: Field<f64>,
    output_stride: Field<usize>,
    tau_end: Field<f64>,
}

/// Options that steer the pipeline but are not model parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub grid_step: f64,
    pub n_max: u32,
    pub history_factor: f64,
    pub output_stride: usize,
    /// End of the delay grid for equilibrium output; `τ_max` when absent.
    pub tau_end: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            grid_step: DEFAULT_GRID_STEP,
            n_max: DEFAULT_N_MAX,
            history_factor: DEFAULT_HISTORY_FACTOR,
            output_stride: DEFAULT_OUTPUT_STRIDE,
            tau_end: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub params: ModelParams<HillRates>,
    pub run: RunOptions,
    /// Where the text came from, for the manifest.
    pub source: String,
    /// SHA-256 of the raw text.
    pub hash: String,
}

impl Config {
    /// True when the model parameters equal the shipped reference set.
    pub fn is_reference(&self) -> bool {
        self.params == ModelParams::reference(self.params.tau)
    }
}

/// A key-level problem located in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyIssue {
    pub key: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for KeyIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.key, self.message)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, source: &str) -> Result<Config, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let mut missing = Vec::new();
    let mut take = |section: &str, key: &str, field: Field<f64>| -> Option<Spanned<f64>> {
        if field.is_none() {
            missing.push(format!("{section}.{key}"));
        }
        field
    };

    let model = raw.model.unwrap_or(RawModel { delta: None, gamma: None, mu: None, k: None });
    let hill = raw.hill.unwrap_or(RawHill { beta0: None, G: None, a: None, K: None, r: None });
    let delta = take("model", "delta", model.delta);
    let gamma = take("model", "gamma", model.gamma);
    let mu = take("model", "mu", model.mu);
    let k = take("model", "k", model.k);
    let beta0 = take("hill", "beta0", hill.beta0);
    let g_rate = take("hill", "G", hill.G);
    let a = take("hill", "a", hill.a);
    let scale = take("hill", "K", hill.K);
    let r = take("hill", "r", hill.r);
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    let v = |s: Option<Spanned<f64>>| s.map(Spanned::into_inner).unwrap_or_default();
    let spans: Vec<(&str, &str, usize)> = [
        ("model", "delta", &delta),
        ("model", "gamma", &gamma),
        ("model", "mu", &mu),
        ("model", "k", &k),
        ("hill", "beta0", &beta0),
        ("hill", "G", &g_rate),
        ("hill", "a", &a),
        ("hill", "K", &scale),
        ("hill", "r", &r),
    ]
    .into_iter()
    .map(|(s, key, f)| (s, key, f.as_ref().map_or(0, |x| line_of(text, x.span().start))))
    .collect();

    let params = ModelParams {
        delta: v(delta),
        gamma: v(gamma),
        tau: 0.0,
        mu: v(mu),
        k: v(k),
        rates: HillRates {
            beta0: v(beta0),
            g_rate: v(g_rate),
            amplitude: v(a),
            scale: v(scale),
            exponent: v(r),
        },
    };

    let mut issues: Vec<KeyIssue> = validate(&params)
        .into_iter()
        .map(|viol| {
            let (section, key, line) = spans
                .iter()
                .find(|(_, key, _)| *key == viol.parameter)
                .copied()
                .unwrap_or(("model", "tau", 0));
            KeyIssue {
                key: format!("{section}.{key}"),
                line,
                message: format!("{} is not {}", viol.value, viol.requirement),
            }
        })
        .collect();

    let mut run = RunOptions::default();
    if let Some(raw_run) = raw.run {
        let mut positive = |key: &str, field: Field<f64>, slot: &mut f64| {
            if let Some(s) = field {
                let line = line_of(text, s.span().start);
                let x = s.into_inner();
                if x > 0.0 && x.is_finite() {
                    *slot = x;
                } else {
                    issues.push(KeyIssue { key: format!("run.{key}"), line, message: format!("{x} is not > 0") });
                }
            }
        };
        positive("grid_step", raw_run.grid_step, &mut run.grid_step);
        positive("history_factor", raw_run.history_factor, &mut run.history_factor);
        let mut tau_end = f64::NAN;
        if raw_run.tau_end.is_some() {
            positive("tau_end", raw_run.tau_end, &mut tau_end);
            run.tau_end = tau_end.is_finite().then_some(tau_end);
        }
        if let Some(n) = raw_run.n_max {
            run.n_max = n.into_inner();
        }
        if let Some(s) = raw_run.output_stride {
            let line = line_of(text, s.span().start);
            match s.into_inner() {
                0 => issues.push(KeyIssue { key: "run.output_stride".into(), line, message: "0 is not >= 1".into() }),
                n => run.output_stride = n,
            }
        }
    }
    if !issues.is_empty() {
        return Err(ConfigError::Invalid(issues));
    }

    Ok(Config { params, run, source: source.to_string(), hash: sha256_hex(text.as_bytes()) })
}

pub fn default_config() -> Config {
    parse_config_str(DEFAULT_CONFIG, "<built-in default>").expect("shipped default config is valid")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_is_the_reference_set() {
        let c = default_config();
        assert_eq!(c.params, ModelParams::reference(0.0));
        assert!(c.is_reference());
        assert_eq!(c.run, RunOptions { tau_end: None, ..RunOptions::default() });
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn empty_file_lists_every_required_key() {
        let ConfigError::Missing(keys) = parse_config_str("", "t").unwrap_err() else { panic!() };
        assert_eq!(
            keys,
            ["model.delta", "model.gamma", "model.mu", "model.k", "hill.beta0", "hill.G", "hill.a", "hill.K", "hill.r"]
        );
    }

    #[test]
    fn fractional_exponent_is_rejected_with_line() {
        let text = DEFAULT_CONFIG.replace("r = 7.0", "r = 0.5");
        let ConfigError::Invalid(issues) = parse_config_str(&text, "t").unwrap_err() else { panic!() };
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].key, "hill.r");
        let want = text.lines().position(|l| l.starts_with("r = 0.5")).unwrap() + 1;
        assert_eq!(issues[0].line, want);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = DEFAULT_CONFIG.replace("mu = 0.02", "mu = 0.02\nnu = 1.0");
        let err = parse_config_str(&text, "t").unwrap_err().to_string();
        assert!(err.contains("nu") && err.contains("line"), "{err}");
    }

    #[test]
    fn ill_typed_key_names_key_and_line() {
        let text = DEFAULT_CONFIG.replace("k = 2.8", "k = \"fast\"");
        let err = parse_config_str(&text, "t").unwrap_err().to_string();
        assert!(err.contains("line") && err.contains('k'), "{err}");
    }

    #[test]
    fn integer_literals_are_accepted() {
        let text = DEFAULT_CONFIG.replace("r = 7.0", "r = 7");
        assert_eq!(parse_config_str(&text, "t").unwrap().params.rates.exponent, 7.0);
    }

    #[test]
    fn run_section_is_validated() {
        let text = DEFAULT_CONFIG.replace("grid_step = 0.005", "grid_step = -1.0");
        let ConfigError::Invalid(issues) = parse_config_str(&text, "t").unwrap_err() else { panic!() };
        assert_eq!(issues[0].key, "run.grid_step");
    }
}
