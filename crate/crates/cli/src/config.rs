//! Flat TOML config file, merged under command-line flags.
//!
//! Every key is optional. Scenario keys mirror the scenario field names:
//!
//! ```toml
//! gamma = 3.5
//! sigma = 8.0
//! pl0 = 40.0
//! d0 = 1.0
//! pt = 20.0
//! slot_duration = 0.01
//! n_rounds = 600
//! seed = 42
//!
//! k = 128
//! target = 0.99
//! d_be = 20.0
//! geometry = "collinear"      # or "equidistant"
//! rule = "ml-pairwise"        # or "random-guess"
//! metric = "per-bit-secret"   # or "whole-key"
//!
//! ks = [64, 128, 256]
//! ns = [100, 200, 300]
//! d_bes = [2.0, 20.0, 35.0]
//! sigmas = [2.0, 8.0, 14.0]
//! trials = 2000
//! budget = 100000000
//! ```

use std::path::Path;

use hopkey::experiments::{DEFAULT_BUDGET, DEFAULT_TRIALS};
use hopkey::{AdversaryRule, Geometry, Metric, ScenarioConfig};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_K: u64 = 128;
pub const DEFAULT_D_BE: f64 = 20.0;

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub pl0: Option<f64>,
    pub d0: Option<f64>,
    pub pt: Option<f64>,
    pub slot_duration: Option<f64>,
    pub n_rounds: Option<u64>,
    pub seed: Option<u64>,
    pub k: Option<u64>,
    pub target: Option<f64>,
    pub d_be: Option<f64>,
    pub geometry: Option<Geometry>,
    pub rule: Option<AdversaryRule>,
    pub metric: Option<Metric>,
    pub ks: Option<Vec<u64>>,
    pub ns: Option<Vec<u64>>,
    pub d_bes: Option<Vec<f64>>,
    pub sigmas: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub budget: Option<u64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        macro_rules! pick {
            ($($f:ident),*) => {
                FileConfig { $($f: over.$f.or(self.$f)),* }
            };
        }
        pick!(
            gamma,
            sigma,
            pl0,
            d0,
            pt,
            slot_duration,
            n_rounds,
            seed,
            k,
            target,
            d_be,
            geometry,
            rule,
            metric,
            ks,
            ns,
            d_bes,
            sigmas,
            trials,
            budget
        )
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// `seed` here is only meaningful when [`Settings::seed`] is set.
    pub scenario: ScenarioConfig,
    pub seed: Option<u64>,
    pub k: u64,
    pub target: f64,
    pub d_be: f64,
    pub geometry: Geometry,
    pub rule: AdversaryRule,
    pub metric: Metric,
    pub ks: Vec<u64>,
    pub ns: Vec<u64>,
    pub d_bes: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub trials: u64,
    pub budget: u64,
}

impl Settings {
    pub fn resolve(c: FileConfig) -> Self {
        let d = ScenarioConfig::default();
        let scenario = ScenarioConfig {
            gamma: c.gamma.unwrap_or(d.gamma),
            sigma: c.sigma.unwrap_or(d.sigma),
            pl0: c.pl0.unwrap_or(d.pl0),
            d0: c.d0.unwrap_or(d.d0),
            pt: c.pt.unwrap_or(d.pt),
            slot_duration: c.slot_duration.unwrap_or(d.slot_duration),
            n_rounds: c.n_rounds.unwrap_or(d.n_rounds),
            seed: c.seed.unwrap_or(d.seed),
        };
        let k = c.k.unwrap_or(DEFAULT_K);
        let d_be = c.d_be.unwrap_or(DEFAULT_D_BE);
        Settings {
            scenario,
            seed: c.seed,
            k,
            target: c.target.unwrap_or(hopkey::analysis::DEFAULT_TARGET),
            d_be,
            geometry: c.geometry.unwrap_or_default(),
            rule: c.rule.unwrap_or(AdversaryRule::MlPairwise),
            metric: c.metric.unwrap_or_default(),
            ks: c.ks.unwrap_or_else(|| vec![k]),
            ns: c.ns.unwrap_or_else(|| vec![scenario.n_rounds]),
            d_bes: c.d_bes.unwrap_or_else(|| vec![d_be]),
            sigmas: c.sigmas.unwrap_or_else(|| vec![scenario.sigma]),
            trials: c.trials.unwrap_or(DEFAULT_TRIALS),
            budget: c.budget.unwrap_or(DEFAULT_BUDGET),
        }
    }

    pub fn with_seed(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig { seed, ..self.scenario }
    }
}

/// Parses `a,b,c` or the inclusive range `start:stop:step`. An empty string
/// is an empty list.
pub fn parse_u64_axis(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((start, rest)) = s.split_once(':') {
        let (stop, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step == 0 {
            return Err("range step must be positive".into());
        }
        return Ok((start..=stop).step_by(step as usize).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// Float version of [`parse_u64_axis`]; range points are `start + i * step`.
pub fn parse_f64_axis(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    if let Some((start, rest)) = s.split_once(':') {
        let (stop, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
            return Err("range needs finite bounds and a positive step".into());
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if count < 0.0 {
            return Ok(Vec::new());
        }
        return Ok((0..=count as u64).map(|i| start + i as f64 * step).collect());
    }
    s.split(',').map(num).collect()
}
