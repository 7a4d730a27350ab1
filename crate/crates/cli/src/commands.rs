use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use hopkey::adversary::ml_success_prob;
use hopkey::analysis::{key_prob, min_transmissions, privacy_radius, secret_bit_prob, COLLISION_PROBABILITY};
use hopkey::channel::delta_mean_pathloss;
use hopkey::experiments::{gnuplot_script, run_engagement, write_frontier_csv, PlotKind};
use hopkey::protocol::run_scripted;
use hopkey::{
    analytic_sweep, frontier as frontier_rows, sweep as run_sweep, AdversaryRule, AnalysisError, FrontierSource,
    KeyRequest, Probability, ResultTable, SweepSpec,
};

use crate::config::Settings;
use crate::error::CliError;

pub struct Context {
    pub settings: Settings,
    pub out_dir: PathBuf,
    pub ci: bool,
    pub threads: Option<usize>,
}

impl Context {
    fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }

    fn write_file<F, E>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), E>,
        E: std::fmt::Display,
    {
        let path = self.out_path(name)?;
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| CliError::io(&path, e))?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// The explicit seed, or a fresh one. Echoed either way.
    fn seed(&self, required: bool) -> Result<u64, CliError> {
        let seed = match self.settings.seed {
            Some(s) => s,
            None if required => {
                return Err(CliError::Config(
                    "--ci requires an explicit --seed (or `seed` in the config file)".into(),
                ));
            }
            None => rand::random(),
        };
        println!("seed = {seed}");
        Ok(seed)
    }

    fn spec(&self, base_seed: u64) -> SweepSpec {
        let s = &self.settings;
        SweepSpec {
            ks: s.ks.clone(),
            ns: s.ns.clone(),
            d_bes: s.d_bes.clone(),
            sigmas: s.sigmas.clone(),
            trials: s.trials,
            base_seed,
            rule: s.rule,
            metric: s.metric,
            geometry: s.geometry,
            base: s.with_seed(base_seed),
            budget: s.budget,
        }
    }

    fn run_sweep(&self, spec: &SweepSpec) -> Result<ResultTable, CliError> {
        spec.validate()?;
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(|| run_sweep(spec))?)
            }
            None => Ok(run_sweep(spec)?),
        }
    }
}

/// Plain decimal, or scientific notation for tiny values.
fn fmt_prob(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-6 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn reason(e: &AnalysisError) -> String {
    match e {
        AnalysisError::Infeasible(m) => m.clone(),
        other => other.to_string(),
    }
}

fn write_str(w: &mut impl Write, text: &str) -> io::Result<()> {
    w.write_all(text.as_bytes())
}

pub fn session(ctx: &Context) -> Result<(), CliError> {
    let s = &ctx.settings;
    let seed = ctx.seed(false)?;
    let cfg = s.with_seed(seed);
    let dep = s.geometry.deployment(s.d_be)?;
    let eng = run_engagement(&cfg, dep, s.rule)?;
    ctx.write_file("transcript.csv", |w| eng.transcript.write_csv(w))?;
    ctx.write_file("adversary.csv", |w| eng.trace.write_csv(&eng.transcript, w))?;
    let r = eng.report;
    println!("rounds = {}", r.n_rounds);
    println!("session_seconds = {}", cfg.session_duration());
    println!("d_ab = {}", eng.deployment.d_ab());
    println!("d_ae = {}", eng.deployment.d_ae());
    println!("d_be = {}", eng.deployment.d_be());
    println!("rule = {}", s.rule);
    println!("key_bits = {}", r.generated);
    println!("key = {}", eng.transcript.key_string());
    println!("eve_correct = {}", r.guessed_correct);
    println!("secret_bits = {}", r.secret);
    println!("k = {}", s.k);
    println!("per_bit_success = {}", r.per_bit_success(s.k));
    println!("whole_key_success = {}", r.whole_key_success(s.k));
    Ok(())
}

pub fn analyze(ctx: &Context, pb: Option<f64>) -> Result<(), CliError> {
    let s = &ctx.settings;
    let cfg = s.scenario.validate()?;
    let req = KeyRequest::new(s.k, s.target)?;
    let p_c = Probability::new(COLLISION_PROBABILITY)?;
    let out = io::stdout();
    let mut out = out.lock();
    let mut line = |text: String| writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()));
    let p_b = match pb {
        Some(v) => {
            let p_b = Probability::new(v)?;
            line(format!("p_b = {}", fmt_prob(p_b.value())))?;
            p_b
        }
        None => {
            let dep = s.geometry.deployment(s.d_be)?;
            let delta = delta_mean_pathloss(dep.d_ae(), dep.d_be(), cfg.gamma);
            let p_g = match s.rule {
                AdversaryRule::RandomGuess => 0.5,
                AdversaryRule::MlPairwise => ml_success_prob(delta, cfg.sigma),
            };
            let p_g = Probability::new(p_g)?;
            let p_b = secret_bit_prob(p_c, p_g);
            line(format!("geometry = {}", s.geometry))?;
            line(format!("d_ae = {}", dep.d_ae()))?;
            line(format!("d_be = {}", dep.d_be()))?;
            line(format!("sigma = {}", cfg.sigma))?;
            line(format!("delta_db = {delta}"))?;
            line(format!("p_c = {}", p_c.value()))?;
            line(format!("p_g = {}", fmt_prob(p_g.value())))?;
            line(format!("p_b = {}", fmt_prob(p_b.value())))?;
            p_b
        }
    };
    line(format!("k = {}", req.k))?;
    line(format!("target = {}", req.target.value()))?;
    line(format!("n = {}", cfg.n_rounds))?;
    line(format!(
        "key_prob = {}",
        fmt_prob(key_prob(req.k, cfg.n_rounds, p_b).value())
    ))?;
    let min_n = min_transmissions(&req, p_b);
    match &min_n {
        Ok(n) => line(format!("min_n = {n}"))?,
        Err(e) => line(format!("min_n = infeasible ({})", reason(e)))?,
    }
    if pb.is_none() {
        match privacy_radius(&req, cfg.n_rounds, cfg.sigma, cfg.gamma, cfg.d0) {
            Ok(r) => line(format!("privacy_radius_m = {}", r.radius))?,
            Err(e) => line(format!("privacy_radius_m = infeasible ({})", reason(&e)))?,
        }
    }
    min_n.map(|_| ()).map_err(CliError::from)
}

fn write_table(ctx: &Context, name: &str, table: &ResultTable) -> Result<(), CliError> {
    ctx.write_file(name, |w| table.write_csv(w))?;
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let seed = ctx.seed(ctx.ci)?;
    let spec = ctx.spec(seed);
    spec.validate()?;
    let table = ctx.run_sweep(&spec)?;
    write_table(ctx, "sweep.csv", &table)?;
    ctx.write_file("sweep.gp", |w| {
        write_str(
            w,
            &gnuplot_script(
                PlotKind::ProbabilityVsTransmissions,
                "key establishment",
                "sweep.csv",
                "sweep.png",
            ),
        )
    })?;
    ctx.write_file("sweep_heatmap.gp", |w| {
        write_str(
            w,
            &gnuplot_script(
                PlotKind::DistanceHeatmap,
                "key establishment",
                "sweep.csv",
                "sweep_heatmap.png",
            ),
        )
    })?;
    println!("points = {}", table.rows.len());
    Ok(())
}

pub fn frontier(ctx: &Context, source: FrontierSource) -> Result<(), CliError> {
    let s = &ctx.settings;
    if !(s.target > 0.0 && s.target < 1.0) {
        return Err(CliError::Config(format!(
            "target {} must lie strictly between 0 and 1",
            s.target
        )));
    }
    let table = match source {
        FrontierSource::Analytic => {
            // no trials are run, so trial count and budget do not apply
            let spec = SweepSpec {
                trials: 1,
                budget: u64::MAX,
                ..ctx.spec(s.seed.unwrap_or(0))
            };
            spec.validate()?;
            analytic_sweep(&spec)?
        }
        FrontierSource::Empirical => {
            let seed = ctx.seed(ctx.ci)?;
            ctx.run_sweep(&ctx.spec(seed))?
        }
    };
    write_table(ctx, "sweep.csv", &table)?;
    let rows = frontier_rows(&table, s.target, source);
    ctx.write_file("frontier.csv", |w| write_frontier_csv(&rows, w))?;
    ctx.write_file("frontier.gp", |w| {
        write_str(
            w,
            &gnuplot_script(PlotKind::Frontier, "privacy frontier", "frontier.csv", "frontier.png"),
        )
    })?;
    let infeasible = rows.iter().filter(|r| r.min_n.is_none()).count();
    println!("frontier_rows = {}", rows.len());
    println!("infeasible_rows = {infeasible}");
    Ok(())
}

/// Scripted bits of the six-slot worked example.
pub const FIXTURE_ALICE: [bool; 6] = [false, false, true, false, false, true];
pub const FIXTURE_BOB: [bool; 6] = [false, true, false, true, false, true];

pub fn fixture() -> Result<(), CliError> {
    let t = run_scripted(&FIXTURE_ALICE, &FIXTURE_BOB)?;
    let mut buf = Vec::new();
    t.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    print!("{}", String::from_utf8_lossy(&buf));
    let collisions: Vec<String> = t.collision_rounds().map(|r| r.to_string()).collect();
    println!("collisions = {}", collisions.join(","));
    println!("key = {}", t.key_string());
    Ok(())
}
