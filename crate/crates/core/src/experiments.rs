//! Seeded Monte Carlo sweeps over `(k, sigma, d_be, n)` grids.
//!
//! Every trial owns a ChaCha8 generator seeded from
//! `(base_seed, point index, trial index)`: stream 0 drives the protocol,
//! stream 1 drives Eve's shadowing draws and coin flips. Results are a pure
//! function of the spec, whatever the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    classify, eavesdrop_session, ml_success_prob, observe_round, AdversaryError, AdversaryRule, AttackTrace,
    EveKnowledge, Guess, SecrecyReport,
};
use crate::analysis::{key_prob, secret_bit_prob, Probability, COLLISION_PROBABILITY};
use crate::channel::{delta_mean_pathloss, ChannelModel};
use crate::protocol::{node_round_action, resolve_round, run_session, NodeId, SessionTranscript};
use crate::scenario::{ConfigError, Deployment, ScenarioConfig};

pub const DEFAULT_TRIALS: u64 = 2000;

/// Upper bound on `grid points x trials` for one sweep.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sweep axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("{requested} trials exceed the budget of {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Where Eve sits for a given `d_be`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// On the Alice-Bob axis beyond Bob: `d_AE = d_BE + 50`.
    #[default]
    Collinear,
    /// On the perpendicular bisector, `d_AE = d_BE` (needs `d_be >= 25`).
    Equidistant,
}

impl Geometry {
    pub fn deployment(self, d_be: f64) -> Result<Deployment, ConfigError> {
        match self {
            Geometry::Collinear => Deployment::canonical(d_be),
            Geometry::Equidistant => Deployment::equidistant(d_be),
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Collinear => "collinear",
            Geometry::Equidistant => "equidistant",
        })
    }
}

impl std::str::FromStr for Geometry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "collinear" => Ok(Geometry::Collinear),
            "equidistant" => Ok(Geometry::Equidistant),
            other => Err(format!("unknown geometry `{other}`")),
        }
    }
}

/// What counts as a successful trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// At least `k` key bits Eve did not guess.
    #[default]
    PerBitSecret,
    /// A `k`-bit key was agreed and Eve missed at least one of its bits.
    WholeKey,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::PerBitSecret => "per-bit-secret",
            Metric::WholeKey => "whole-key",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-bit-secret" => Ok(Metric::PerBitSecret),
            "whole-key" => Ok(Metric::WholeKey),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// One fully specified grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub k: u64,
    pub n: u64,
    pub d_be: f64,
    pub sigma: f64,
    pub rule: AdversaryRule,
    pub metric: Metric,
    pub geometry: Geometry,
    /// Supplies `gamma`, `pl0`, `d0` and `pt`; `sigma` and `n_rounds` are
    /// taken from the point itself.
    pub base: ScenarioConfig,
}

impl GridParams {
    fn config(&self) -> ScenarioConfig {
        ScenarioConfig {
            sigma: self.sigma,
            n_rounds: self.n.max(1),
            ..self.base
        }
    }

    pub fn deployment(&self) -> Result<Deployment, ConfigError> {
        self.geometry.deployment(self.d_be)
    }

    /// Closed-form success probability for this point.
    pub fn analytic(&self) -> Result<Probability, ConfigError> {
        let dep = self.deployment()?;
        let p_g = match self.rule {
            AdversaryRule::RandomGuess => 0.5,
            AdversaryRule::MlPairwise => {
                ml_success_prob(delta_mean_pathloss(dep.d_ae(), dep.d_be(), self.base.gamma), self.sigma)
            }
        };
        let p_c = Probability::new(COLLISION_PROBABILITY).expect("constant");
        let p_g_prob = Probability::new(p_g).expect("closed forms are probabilities");
        Ok(match self.metric {
            Metric::PerBitSecret => key_prob(self.k, self.n, secret_bit_prob(p_c, p_g_prob)),
            Metric::WholeKey => {
                let agreed = key_prob(self.k, self.n, p_c.complement()).value();
                let eve_all = p_g.powf(self.k as f64);
                Probability::new((agreed * (1.0 - eve_all)).clamp(0.0, 1.0)).expect("clamped")
            }
        })
    }

    fn succeeded(&self, report: &SecrecyReport) -> bool {
        match self.metric {
            Metric::PerBitSecret => report.per_bit_success(self.k),
            Metric::WholeKey => report.whole_key_success(self.k),
        }
    }
}

/// Per-trial seed from the sweep seed and the trial's coordinates.
pub fn derive_seed(base_seed: u64, point: u64, trial: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(base_seed) ^ point) ^ trial)
}

fn stream_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let proto = ChaCha8Rng::seed_from_u64(seed);
    let mut eve = ChaCha8Rng::seed_from_u64(seed);
    eve.set_stream(1);
    (proto, eve)
}

/// A session together with everything Eve saw and guessed.
#[derive(Debug, Clone, PartialEq)]
pub struct Engagement {
    pub deployment: Deployment,
    pub transcript: SessionTranscript,
    pub trace: AttackTrace,
    pub report: SecrecyReport,
}

/// Full-record session against Eve, seeded by `cfg.seed`.
pub fn run_engagement(
    cfg: &ScenarioConfig,
    deployment: Deployment,
    rule: AdversaryRule,
) -> Result<Engagement, ExperimentError> {
    let cfg = cfg.validate()?;
    let channel = ChannelModel::from_config(&cfg);
    let knowledge = EveKnowledge::new(&deployment, &channel, rule);
    let (mut proto, mut eve) = stream_rngs(cfg.seed);
    let transcript = run_session(&cfg, &mut proto);
    let trace = eavesdrop_session(&transcript, &deployment, &channel, &knowledge, &mut eve)?;
    let report = crate::adversary::score_session(&transcript, &trace.guesses)?;
    Ok(Engagement {
        deployment,
        transcript,
        trace,
        report,
    })
}

/// Streaming equivalent of [`run_engagement`] that keeps only the counts.
pub fn simulate_trial(
    cfg: &ScenarioConfig,
    deployment: &Deployment,
    rule: AdversaryRule,
) -> Result<SecrecyReport, ExperimentError> {
    let channel = ChannelModel::from_config(cfg);
    let knowledge = EveKnowledge::new(deployment, &channel, rule);
    let (mut proto, mut eve) = stream_rngs(cfg.seed);
    let mut generated = 0;
    let mut guessed_correct = 0;
    let mut first_miss = None;
    for round in 1..=cfg.n_rounds {
        let alice = node_round_action(NodeId::Alice, &mut proto).expect("rng source");
        let bob = node_round_action(NodeId::Bob, &mut proto).expect("rng source");
        let outcome = resolve_round(alice, bob);
        let Some(truth) = outcome.shared_bit() else {
            continue;
        };
        let obs = observe_round(round, &outcome, deployment, &channel, &mut eve).map_err(AdversaryError::from)?;
        let Guess { decision, .. } = classify(&obs, &knowledge, &mut eve)?;
        if decision.is_correct(truth) {
            guessed_correct += 1;
        } else if first_miss.is_none() {
            first_miss = Some(generated);
        }
        generated += 1;
    }
    Ok(SecrecyReport {
        n_rounds: cfg.n_rounds,
        generated,
        guessed_correct,
        secret: generated - guessed_correct,
        first_miss,
    })
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: Probability,
    pub ci: (f64, f64),
}

/// Fraction of `trials` seeded sessions that meet the metric at `params`.
pub fn run_grid_point(
    params: &GridParams,
    trials: u64,
    base_seed: u64,
    point_index: u64,
) -> Result<GridEstimate, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    if trials > DEFAULT_BUDGET {
        return Err(ExperimentError::BudgetExceeded {
            requested: trials,
            budget: DEFAULT_BUDGET,
        });
    }
    let deployment = params.deployment()?;
    let cfg = params.config();
    let successes = if params.k == 0 {
        trials
    } else if params.n == 0 {
        0
    } else {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let cfg = ScenarioConfig {
                    seed: derive_seed(base_seed, point_index, t),
                    ..cfg
                };
                simulate_trial(&cfg, &deployment, params.rule).map(|r| u64::from(params.succeeded(&r)))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?
    };
    Ok(GridEstimate {
        successes,
        trials,
        p_hat: Probability::new(successes as f64 / trials as f64).expect("ratio"),
        ci: wilson_interval(successes, trials),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ks: Vec<u64>,
    pub ns: Vec<u64>,
    pub d_bes: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub trials: u64,
    pub base_seed: u64,
    pub rule: AdversaryRule,
    pub metric: Metric,
    pub geometry: Geometry,
    pub base: ScenarioConfig,
    pub budget: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ks: vec![128],
            ns: vec![300],
            d_bes: vec![20.0],
            sigmas: vec![8.0],
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            rule: AdversaryRule::MlPairwise,
            metric: Metric::PerBitSecret,
            geometry: Geometry::Collinear,
            base: ScenarioConfig::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

impl SweepSpec {
    /// Grid points in row order: `k`, then `sigma`, then `d_be`, then `n`.
    pub fn points(&self) -> Vec<GridParams> {
        let mut out = Vec::with_capacity(self.ks.len() * self.sigmas.len() * self.d_bes.len() * self.ns.len());
        for &k in &self.ks {
            for &sigma in &self.sigmas {
                for &d_be in &self.d_bes {
                    for &n in &self.ns {
                        out.push(GridParams {
                            k,
                            n,
                            d_be,
                            sigma,
                            rule: self.rule,
                            metric: self.metric,
                            geometry: self.geometry,
                            base: self.base,
                        });
                    }
                }
            }
        }
        out
    }

    /// Everything [`sweep`] checks, plus non-empty axes.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (name, empty) in [
            ("k", self.ks.is_empty()),
            ("n", self.ns.is_empty()),
            ("d_be", self.d_bes.is_empty()),
            ("sigma", self.sigmas.is_empty()),
        ] {
            if empty {
                return Err(ExperimentError::EmptyAxis(name));
            }
        }
        self.check_values()
    }

    fn check_physical(&self) -> Result<(), ExperimentError> {
        self.base.validate()?;
        for &d in &self.d_bes {
            self.geometry.deployment(d)?;
        }
        for &s in &self.sigmas {
            ScenarioConfig { sigma: s, ..self.base }.validate()?;
        }
        Ok(())
    }

    fn check_values(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::NoTrials);
        }
        self.check_physical()?;
        let points = (self.ks.len() * self.ns.len() * self.d_bes.len() * self.sigmas.len()) as u64;
        let requested = points.saturating_mul(self.trials);
        if requested > self.budget {
            return Err(ExperimentError::BudgetExceeded {
                requested,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub k: u64,
    pub n: u64,
    pub d_be: f64,
    pub sigma: f64,
    pub rule: AdversaryRule,
    pub metric: Metric,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_analytic: Option<f64>,
}

impl ResultRow {
    pub fn wilson_half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Header plus one row per grid point, columns
    /// `k,n,d_be,sigma,rule,metric,trials,p_hat,ci_lo,ci_hi,p_analytic`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record([
            "k",
            "n",
            "d_be",
            "sigma",
            "rule",
            "metric",
            "trials",
            "p_hat",
            "ci_lo",
            "ci_hi",
            "p_analytic",
        ])?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: io::Read>(input: R) -> csv::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<csv::Result<Vec<ResultRow>>>()?;
        Ok(Self { rows })
    }
}

/// Runs every grid point of `spec`. An empty axis yields an empty table.
pub fn sweep(spec: &SweepSpec) -> Result<ResultTable, ExperimentError> {
    let points = spec.points();
    if points.is_empty() {
        return Ok(ResultTable::default());
    }
    spec.check_values()?;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let est = run_grid_point(p, spec.trials, spec.base_seed, i as u64)?;
            Ok(ResultRow {
                k: p.k,
                n: p.n,
                d_be: p.d_be,
                sigma: p.sigma,
                rule: p.rule,
                metric: p.metric,
                trials: est.trials,
                p_hat: est.p_hat.value(),
                ci_lo: est.ci.0,
                ci_hi: est.ci.1,
                p_analytic: Some(p.analytic()?.value()),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ResultTable { rows })
}

/// Closed-form counterpart of [`sweep`]. No trials are run: `trials` is 0
/// and `p_hat` and its interval all hold the analytic value.
pub fn analytic_sweep(spec: &SweepSpec) -> Result<ResultTable, ExperimentError> {
    let points = spec.points();
    if points.is_empty() {
        return Ok(ResultTable::default());
    }
    spec.check_physical()?;
    let rows = points
        .iter()
        .map(|p| {
            let v = p.analytic()?.value();
            Ok(ResultRow {
                k: p.k,
                n: p.n,
                d_be: p.d_be,
                sigma: p.sigma,
                rule: p.rule,
                metric: p.metric,
                trials: 0,
                p_hat: v,
                ci_lo: v,
                ci_hi: v,
                p_analytic: Some(v),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ResultTable { rows })
}

/// Which column of a [`ResultTable`] a frontier is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrontierSource {
    #[default]
    Empirical,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub k: u64,
    pub sigma: f64,
    pub d_be: f64,
    /// Smallest grid `n` reaching the target, `None` if none does.
    pub min_n: Option<u64>,
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
fn isotonic_non_decreasing(values: &[(f64, f64)]) -> Vec<f64> {
    // blocks of (weighted mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for &(v, w) in values {
        let w = w.max(f64::MIN_POSITIVE);
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (v2, w2, l2) = blocks[blocks.len() - 1];
            let (v1, w1, l1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, l1 + l2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, _, l)| std::iter::repeat_n(v, l))
        .collect()
}

/// For every `(k, sigma, d_be)` in `table`, the smallest `n` whose estimate
/// reaches `target`.
///
/// Estimates are first made non-decreasing in `n` by isotonic regression
/// (weighted by trial count), then the per-`d_be` minima are made
/// non-increasing in `d_be`: a farther eavesdropper never needs more
/// transmissions than a closer one. Rows come out sorted by `k`, `sigma`,
/// `d_be`.
pub fn frontier(table: &ResultTable, target: f64, source: FrontierSource) -> Vec<FrontierRow> {
    type Key = (u64, u64, u64);
    let mut groups: BTreeMap<Key, Vec<&ResultRow>> = BTreeMap::new();
    for row in &table.rows {
        // ordered float keys; all values here are finite and non-negative
        groups
            .entry((row.k, row.sigma.to_bits(), row.d_be.to_bits()))
            .or_default()
            .push(row);
    }
    let mut out: Vec<FrontierRow> = groups
        .into_values()
        .map(|mut rows| {
            rows.sort_by_key(|r| r.n);
            let series: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| match source {
                    FrontierSource::Empirical => (r.p_hat, r.trials as f64),
                    FrontierSource::Analytic => (r.p_analytic.unwrap_or(f64::NAN), 1.0),
                })
                .collect();
            let fitted = isotonic_non_decreasing(&series);
            let min_n = rows.iter().zip(&fitted).find(|(_, &p)| p >= target).map(|(r, _)| r.n);
            FrontierRow {
                k: rows[0].k,
                sigma: rows[0].sigma,
                d_be: rows[0].d_be,
                min_n,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.k, a.sigma, a.d_be)
            .partial_cmp(&(b.k, b.sigma, b.d_be))
            .expect("finite grid values")
    });
    let mut i = 0;
    while i < out.len() {
        let (k, sigma) = (out[i].k, out[i].sigma);
        let mut best: Option<u64> = None;
        while i < out.len() && out[i].k == k && out[i].sigma == sigma {
            best = match (best, out[i].min_n) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            out[i].min_n = best;
            i += 1;
        }
    }
    out
}

pub fn write_frontier_csv<W: io::Write>(rows: &[FrontierRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "sigma", "d_be", "min_n", "feasible"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.sigma.to_string(),
            r.d_be.to_string(),
            r.min_n.map(|n| n.to_string()).unwrap_or_default(),
            r.min_n.is_some().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Figure layouts a gnuplot script can be generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Success probability against `n`, one curve per `k`.
    ProbabilityVsTransmissions,
    /// Heat map of success probability over `n` and `d_be`.
    DistanceHeatmap,
    /// Minimum `n` against `d_be`, from a frontier CSV.
    Frontier,
}

/// A gnuplot script that plots `csv_path` (column layout of
/// [`ResultTable::write_csv`] or [`write_frontier_csv`]) into `png_path`.
pub fn gnuplot_script(kind: PlotKind, title: &str, csv_path: &str, png_path: &str) -> String {
    let mut s = String::new();
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{png_path}'\n"));
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set key autotitle columnhead\n");
    match kind {
        PlotKind::ProbabilityVsTransmissions => {
            s.push_str("set xlabel 'transmissions N'\nset ylabel 'P(L >= k | N)'\nset yrange [0:1.05]\n");
            s.push_str(&format!(
                "plot for [kk in system(\"tail -n +2 '{csv_path}' | cut -d, -f1 | sort -un | tr '\\n' ' '\")] \\\n  \
                 '{csv_path}' using ($1 == kk ? $2 : 1/0):8:9:10 with yerrorbars title sprintf('k=%s (sim)', kk), \\\n  \
                 for [kk in system(\"tail -n +2 '{csv_path}' | cut -d, -f1 | sort -un | tr '\\n' ' '\")] \\\n  \
                 '{csv_path}' using ($1 == kk ? $2 : 1/0):11 with lines title sprintf('k=%s (closed form)', kk)\n"
            ));
        }
        PlotKind::DistanceHeatmap => {
            s.push_str("set xlabel 'transmissions N'\nset ylabel 'd_{BE} [m]'\nset cblabel 'P(L >= k | N)'\n");
            s.push_str("set cbrange [0:1]\nset view map\n");
            s.push_str(&format!(
                "splot '{csv_path}' using 2:3:8 with points pointtype 5 palette notitle\n"
            ));
        }
        PlotKind::Frontier => {
            s.push_str("set xlabel 'transmissions N'\nset ylabel 'privacy radius d_{BE} [m]'\n");
            s.push_str(&format!("plot '{csv_path}' using 4:3 with linespoints notitle\n"));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(k: u64, n: u64, d_be: f64, sigma: f64, geometry: Geometry) -> GridParams {
        GridParams {
            k,
            n,
            d_be,
            sigma,
            rule: AdversaryRule::MlPairwise,
            metric: Metric::PerBitSecret,
            geometry,
            base: ScenarioConfig::default(),
        }
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (10, 10), (3, 10), (995, 1000), (1, 1)] {
            let (lo, hi) = wilson_interval(s, n);
            let p = s as f64 / n as f64;
            assert!(lo <= p && p <= hi && (0.0..=1.0).contains(&lo) && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(50, 100);
        // textbook value for 50/100: [0.4038, 0.5962]
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn streaming_trial_matches_full_record() {
        for (dep, rule, sigma) in [
            (Deployment::canonical(20.0).unwrap(), AdversaryRule::MlPairwise, 8.0),
            (Deployment::equidistant(40.0).unwrap(), AdversaryRule::MlPairwise, 0.0),
            (Deployment::canonical(5.0).unwrap(), AdversaryRule::RandomGuess, 14.0),
        ] {
            for seed in 0..20 {
                let cfg = ScenarioConfig {
                    sigma,
                    n_rounds: 300,
                    seed,
                    ..Default::default()
                };
                let full = run_engagement(&cfg, dep, rule).unwrap();
                assert_eq!(simulate_trial(&cfg, &dep, rule).unwrap(), full.report);
            }
        }
    }

    #[test]
    fn trivial_grid_points() {
        let p = point(0, 10, 20.0, 8.0, Geometry::Collinear);
        let est = run_grid_point(&p, 1, 0, 0).unwrap();
        assert_eq!(est.p_hat.value(), 1.0);

        let p = point(1, 300, 20.0, 0.0, Geometry::Collinear);
        let est = run_grid_point(&p, 200, 9, 0).unwrap();
        assert_eq!(est.successes, 0);
        assert_eq!(p.analytic().unwrap().value(), 0.0);

        assert!(matches!(run_grid_point(&p, 0, 0, 0), Err(ExperimentError::NoTrials)));
        let bad = point(1, 10, 10.0, 0.0, Geometry::Equidistant);
        assert!(matches!(run_grid_point(&bad, 1, 0, 0), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn equidistant_no_fading_matches_closed_form() {
        let p = point(128, 300, 60.0, 0.0, Geometry::Equidistant);
        let est = run_grid_point(&p, 10_000, 1, 0).unwrap();
        let analytic = p.analytic().unwrap().value();
        assert!((analytic - 0.995_369_4).abs() < 1e-6);
        assert!((est.p_hat.value() - analytic).abs() < 0.01, "{}", est.p_hat.value());
    }

    #[test]
    fn whole_key_metric() {
        let mut p = point(16, 64, 20.0, 8.0, Geometry::Collinear);
        p.metric = Metric::WholeKey;
        let est = run_grid_point(&p, 4000, 3, 0).unwrap();
        let analytic = p.analytic().unwrap().value();
        let half = 0.5 * (est.ci.1 - est.ci.0);
        assert!(
            (est.p_hat.value() - analytic).abs() <= 3.0 * half,
            "{} vs {analytic}",
            est.p_hat.value()
        );
    }

    #[test]
    fn empty_and_invalid_specs() {
        let spec = SweepSpec {
            ns: vec![],
            ..Default::default()
        };
        assert!(sweep(&spec).unwrap().rows.is_empty());
        assert!(matches!(spec.validate(), Err(ExperimentError::EmptyAxis("n"))));
        let spec = SweepSpec {
            trials: 0,
            ..Default::default()
        };
        assert!(matches!(sweep(&spec), Err(ExperimentError::NoTrials)));
        let spec = SweepSpec {
            trials: 1000,
            budget: 999,
            ..Default::default()
        };
        assert!(matches!(sweep(&spec), Err(ExperimentError::BudgetExceeded { .. })));
        let spec = SweepSpec {
            sigmas: vec![-1.0],
            ..Default::default()
        };
        assert!(matches!(sweep(&spec), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn csv_round_trip_and_layout() {
        let spec = SweepSpec {
            ks: vec![4],
            ns: vec![8, 16],
            d_bes: vec![20.0],
            sigmas: vec![8.0],
            trials: 50,
            ..Default::default()
        };
        let table = sweep(&spec).unwrap();
        let text = table.to_csv_string();
        assert!(text.starts_with("k,n,d_be,sigma,rule,metric,trials,p_hat,ci_lo,ci_hi,p_analytic\n4,8,20.0,8.0,ml-pairwise,per-bit-secret,50,"));
        let back = ResultTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, table);
    }

    fn row(k: u64, n: u64, d_be: f64, p: f64) -> ResultRow {
        ResultRow {
            k,
            n,
            d_be,
            sigma: 8.0,
            rule: AdversaryRule::MlPairwise,
            metric: Metric::PerBitSecret,
            trials: 100,
            p_hat: p,
            ci_lo: p,
            ci_hi: p,
            p_analytic: Some(p),
        }
    }

    #[test]
    fn frontier_saturated_and_single_n() {
        let table = ResultTable {
            rows: vec![
                row(64, 100, 2.0, 1.0),
                row(64, 200, 2.0, 1.0),
                row(64, 100, 20.0, 1.0),
                row(64, 200, 20.0, 1.0),
            ],
        };
        let f = frontier(&table, 0.99, FrontierSource::Empirical);
        assert_eq!(
            f.iter().map(|r| r.min_n).collect::<Vec<_>>(),
            vec![Some(100), Some(100)]
        );

        let table = ResultTable {
            rows: vec![row(64, 300, 2.0, 0.5), row(64, 300, 20.0, 0.995)],
        };
        let f = frontier(&table, 0.99, FrontierSource::Analytic);
        assert_eq!(f[0].min_n, None);
        assert_eq!(f[1].min_n, Some(300));
    }

    #[test]
    fn frontier_cleans_noise() {
        // a noisy dip at n=300 and a closer point that looks better than a farther one
        let table = ResultTable {
            rows: vec![
                row(64, 200, 2.0, 0.2),
                row(64, 300, 2.0, 0.999),
                row(64, 400, 2.0, 0.991),
                row(64, 500, 2.0, 1.0),
                row(64, 200, 20.0, 0.5),
                row(64, 300, 20.0, 0.98),
                row(64, 400, 20.0, 0.999),
                row(64, 500, 20.0, 1.0),
            ],
        };
        let f = frontier(&table, 0.99, FrontierSource::Empirical);
        // pooled (0.999 + 0.991) / 2 = 0.995 at d=2 -> 300; d=20 -> 400, capped to 300
        assert_eq!(f[0].min_n, Some(300));
        assert_eq!(f[1].min_n, Some(300));
    }

    #[test]
    fn isotonic_fit() {
        let fit = isotonic_non_decreasing(&[(1.0, 1.0), (3.0, 1.0), (2.0, 1.0), (4.0, 1.0)]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..50 {
            for t in 0..200 {
                assert!(seen.insert(derive_seed(7, p, t)));
            }
        }
    }

    #[test]
    fn plot_scripts_reference_csv() {
        for kind in [
            PlotKind::ProbabilityVsTransmissions,
            PlotKind::DistanceHeatmap,
            PlotKind::Frontier,
        ] {
            let s = gnuplot_script(kind, "t", "out/sweep.csv", "out/sweep.png");
            assert!(s.contains("out/sweep.csv") && s.contains("set output 'out/sweep.png'"));
        }
    }

    #[test]
    fn analytic_sweep_matches_points() {
        let spec = SweepSpec {
            ks: vec![64],
            ns: vec![150, 300],
            d_bes: vec![2.0, 40.0],
            sigmas: vec![8.0],
            trials: 1,
            ..SweepSpec::default()
        };
        let table = analytic_sweep(&spec).unwrap();
        assert_eq!(table.rows.len(), 4);
        for (row, p) in table.rows.iter().zip(spec.points()) {
            assert_eq!(row.trials, 0);
            assert_eq!(row.p_hat, p.analytic().unwrap().value());
            assert_eq!(row.p_analytic, Some(row.p_hat));
        }
        let empty = SweepSpec {
            ns: vec![],
            ..spec.clone()
        };
        assert!(analytic_sweep(&empty).unwrap().rows.is_empty());
        let bad = SweepSpec {
            d_bes: vec![-1.0],
            ..spec
        };
        assert!(analytic_sweep(&bad).is_err());
    }
}
