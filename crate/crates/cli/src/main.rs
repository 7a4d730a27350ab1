//! `hopkey`: run sessions, closed-form analysis and Monte Carlo sweeps.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 infeasible request,
//! 4 I/O error. Errors are printed as one line on stderr.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hopkey::{AdversaryRule, FrontierSource, Geometry, Metric};

use crate::config::{parse_f64_axis, parse_u64_axis, FileConfig};
use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "hopkey",
    version,
    allow_negative_numbers = true,
    about = "Frequency-hopping collision key establishment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory for CSV and plot scripts.
    #[arg(long, global = true, env = "HOPKEY_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Base seed. Generated and echoed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Refuse to run sweeps without an explicit seed.
    #[arg(long, global = true, env = "HOPKEY_CI")]
    ci: bool,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Path-loss exponent.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Shadowing standard deviation, dB.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Reference path loss, dB.
    #[arg(long, global = true)]
    pl0: Option<f64>,
    /// Reference distance, m.
    #[arg(long, global = true)]
    d0: Option<f64>,
    /// Transmit power, dBm.
    #[arg(long, global = true)]
    pt: Option<f64>,
    /// Slot duration, s.
    #[arg(long, global = true)]
    slot_duration: Option<f64>,
    /// Number of transmissions (slots).
    #[arg(long = "n", global = true, value_name = "N")]
    n_rounds: Option<u64>,
    /// Key size in bits.
    #[arg(long, global = true)]
    k: Option<u64>,
    /// Required key-establishment probability.
    #[arg(long, global = true)]
    target: Option<f64>,
    /// Bob-Eve distance, m.
    #[arg(long, global = true)]
    d_be: Option<f64>,
    #[arg(long, global = true, value_parser = parse_geometry)]
    geometry: Option<Geometry>,
    #[arg(long, global = true, value_parser = parse_rule)]
    rule: Option<AdversaryRule>,
}

/// A parsed axis list, kept as one clap value.
#[derive(Debug, Clone)]
struct Axis<T>(Vec<T>);

#[derive(Debug, Args)]
struct SweepArgs {
    /// Key sizes: `64,128` or `start:stop:step`.
    #[arg(long, value_parser = |s: &str| parse_u64_axis(s).map(Axis))]
    ks: Option<Axis<u64>>,
    /// Transmission counts.
    #[arg(long, value_parser = |s: &str| parse_u64_axis(s).map(Axis))]
    ns: Option<Axis<u64>>,
    /// Bob-Eve distances, m.
    #[arg(long, value_parser = |s: &str| parse_f64_axis(s).map(Axis))]
    d_bes: Option<Axis<f64>>,
    /// Shadowing standard deviations, dB.
    #[arg(long, value_parser = |s: &str| parse_f64_axis(s).map(Axis))]
    sigmas: Option<Axis<f64>>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Upper bound on grid points times trials.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    Empirical,
    Analytic,
}

impl From<SourceArg> for FrontierSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Empirical => FrontierSource::Empirical,
            SourceArg::Analytic => FrontierSource::Analytic,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one session against Eve; writes transcript.csv and adversary.csv.
    #[command(allow_negative_numbers = true)]
    Session,
    /// Closed-form probabilities, minimum transmissions and privacy radius.
    #[command(allow_negative_numbers = true)]
    Analyze {
        /// Use this secret-bit probability instead of deriving it.
        #[arg(long)]
        pb: Option<f64>,
    },
    /// Monte Carlo sweep; writes sweep.csv and gnuplot scripts.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        grid: SweepArgs,
    },
    /// Minimum transmissions per distance; writes frontier.csv and sweep.csv.
    #[command(allow_negative_numbers = true)]
    Frontier {
        #[command(flatten)]
        grid: SweepArgs,
        #[arg(long, value_enum, default_value = "empirical")]
        source: SourceArg,
    },
    /// The six-slot worked example.
    #[command(allow_negative_numbers = true)]
    Fixture,
}

fn parse_geometry(s: &str) -> Result<Geometry, String> {
    s.parse()
}

fn parse_rule(s: &str) -> Result<AdversaryRule, String> {
    s.parse()
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

impl Cli {
    fn overrides(&self) -> FileConfig {
        let s = &self.scenario;
        let grid = match &self.command {
            Command::Sweep { grid } | Command::Frontier { grid, .. } => Some(grid),
            _ => None,
        };
        FileConfig {
            gamma: s.gamma,
            sigma: s.sigma,
            pl0: s.pl0,
            d0: s.d0,
            pt: s.pt,
            slot_duration: s.slot_duration,
            n_rounds: s.n_rounds,
            seed: self.seed,
            k: s.k,
            target: s.target,
            d_be: s.d_be,
            geometry: s.geometry,
            rule: s.rule,
            metric: grid.and_then(|g| g.metric),
            ks: grid.and_then(|g| g.ks.clone()).map(|a| a.0),
            ns: grid.and_then(|g| g.ns.clone()).map(|a| a.0),
            d_bes: grid.and_then(|g| g.d_bes.clone()).map(|a| a.0),
            sigmas: grid.and_then(|g| g.sigmas.clone()).map(|a| a.0),
            trials: grid.and_then(|g| g.trials),
            budget: grid.and_then(|g| g.budget),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let settings = config::Settings::resolve(file.overlay(cli.overrides()));
    let ctx = commands::Context {
        settings,
        out_dir: cli.out_dir.clone(),
        ci: cli.ci,
        threads: cli.threads,
    };
    match cli.command {
        Command::Session => commands::session(&ctx),
        Command::Analyze { pb } => commands::analyze(&ctx, pb),
        Command::Sweep { .. } => commands::sweep(&ctx),
        Command::Frontier { source, .. } => commands::frontier(&ctx, source.into()),
        Command::Fixture => commands::fixture(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::from(EXIT_OK as u8);
            }
            let msg = match e.kind() {
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => "a subcommand is required".to_string(),
                _ => e
                    .to_string()
                    .lines()
                    .next()
                    .unwrap_or("")
                    .trim_start_matches("error: ")
                    .to_string(),
            };
            let err = CliError::Usage(msg);
            eprintln!("{err}");
            return ExitCode::from(err.code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.code() as u8)
        }
    }
}
