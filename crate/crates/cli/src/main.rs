//! `shg`: run solvers on hierarchical games and compare them.
//!
//! Exit status: 0 on success, 1 for configuration errors, 2 when at least one
//! solver failed (the others still run and write their outputs).

mod config;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use shg_core::analysis::{classify_lasp, Classification, StabilityOptions};
use shg_core::brd::{brd_solve, compute_eps, local_regret, Grid};
use shg_core::dbi::{dbi_solve, dbi_solve_from};
use shg_core::fields::{iterate_field, iterate_field_from, DEFAULT_GAMMA};
use shg_core::games::DynGame;
use shg_core::{ActionProfile, SolverConfig, StopReason, Trace};

use config::{ExperimentConfig, GridSettings, Overrides, SolverEntry, SolverName};

#[derive(Parser)]
#[command(name = "shg", version, about = "Solvers for structured hierarchical games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run each solver once and write its trace, stability and regret.
    Run(Args),
    /// Record global regret against wall-clock time for each solver.
    Compare(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Built-in game name or path to a game definition file.
    #[arg(long)]
    game: Option<String>,
    /// Experiment configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated solvers: dbi, sim, sym, sym_aln, co, ham, brd.
    #[arg(long, value_delimiter = ',')]
    solver: Option<Vec<String>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per action dimension for BRD and global regret.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => setup(&a, &[SolverName::Dbi]).map(|s| run(&s)),
        Command::Compare(a) => setup(&a, &[SolverName::Dbi, SolverName::Brd]).map(|s| compare(&s)),
    };
    match result {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(2),
        Ok(Err(e)) | Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Setup {
    cfg: ExperimentConfig,
    game: DynGame,
    label: String,
    out: PathBuf,
    /// Resolved grid used for global regret.
    regret_grid: GridSettings,
}

/// Loads and validates everything a command needs. Every error here is a
/// configuration error.
fn setup(a: &Args, default_solvers: &[SolverName]) -> anyhow::Result<Setup> {
    let o = Overrides {
        game: a.game.clone(),
        solvers: a.solver.clone(),
        alpha: a.alpha,
        iters: a.iters,
        seed: a.seed,
        grid: a.grid,
        out: None,
    };
    let (mut cfg, base) = match &a.config {
        Some(p) => (ExperimentConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (ExperimentConfig::from_overrides(&o)?, PathBuf::from(".")),
    };
    cfg.apply(&o, default_solvers)?;
    // A game named on the command line resolves against the working directory.
    let base = if a.game.is_some() { PathBuf::from(".") } else { base };
    let game = cfg.game.build(cfg.seed, &base)?;
    let label = cfg.game.label();
    let regret_grid = cfg.regret.grid.resolved(&label, game.tree());
    regret_grid.grid(game.tree())?;
    for e in &cfg.solvers {
        if let Some(g) = &e.grid {
            g.resolved(&label, game.tree()).grid(game.tree())?;
        }
    }
    let out = a.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    Ok(Setup { cfg, game, label, out, regret_grid })
}

impl Setup {
    fn solver_config(&self, e: &SolverEntry) -> SolverConfig {
        e.config.clone().expect("filled by ExperimentConfig::apply")
    }

    fn brd_grid(&self, e: &SolverEntry) -> GridSettings {
        e.grid.as_ref().map_or_else(|| self.regret_grid.clone(), |g| g.resolved(&self.label, self.game.tree()))
    }

    fn grid(&self, g: &GridSettings) -> Grid {
        g.grid(self.game.tree()).expect("checked in setup")
    }

    fn global_regret(&self, x: &ActionProfile) -> anyhow::Result<shg_core::brd::RegretReport> {
        if !x.is_finite() {
            anyhow::bail!("profile is not finite");
        }
        Ok(compute_eps(&self.game, x, &self.grid(&self.regret_grid), &self.regret_grid.brd(self.cfg.seed))?)
    }
}

/// Runs a gradient solver (DBI or a baseline field) from `x0`, or from the
/// configured initialization when `x0` is absent.
fn gradient_run(s: &Setup, e: &SolverEntry, c: &SolverConfig, x0: Option<ActionProfile>) -> shg_core::Result<Trace> {
    let gamma = e.gamma.unwrap_or(DEFAULT_GAMMA);
    match (e.solver.field(gamma), x0) {
        (None, None) => dbi_solve(&s.game, c),
        (None, Some(x)) => Ok(dbi_solve_from(&s.game, x, c, None)),
        (Some(k), None) => iterate_field(&s.game, k, c),
        (Some(k), Some(x)) => {
            k.validate()?;
            Ok(iterate_field_from(&s.game, k, x, c))
        }
    }
}

#[derive(Serialize)]
struct SolverSummary {
    solver: &'static str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<StopReason>,
    diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    /// Iterations (gradient solvers) or rounds (BRD).
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_profile: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_global: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_local: Option<f64>,
}

impl SolverSummary {
    fn ok(solver: SolverName) -> Self {
        SolverSummary {
            solver: solver.name(),
            status: "ok",
            error: None,
            stop: None,
            diverged: false,
            converged: None,
            iterations: None,
            final_profile: None,
            classification: None,
            epsilon_global: None,
            epsilon_local: None,
        }
    }

    fn failed(solver: SolverName, err: String) -> Self {
        SolverSummary { status: "error", error: Some(err), ..SolverSummary::ok(solver) }
    }
}

fn error_json(e: impl std::fmt::Display) -> serde_json::Value {
    json!({ "error": e.to_string() })
}

/// Writes `stability.json` and `regret.json` for `x` and fills the matching
/// summary fields.
fn analyse(s: &Setup, e: &SolverEntry, x: &ActionProfile, dir: &Path, sum: &mut SolverSummary) -> anyhow::Result<()> {
    if s.cfg.stability.unwrap_or(true) {
        let lr = (e.solver != SolverName::Brd).then(|| s.solver_config(e).learning_rate);
        let opts = StabilityOptions { learning_rate: lr, ..Default::default() };
        let stability = match classify_lasp(&s.game, x, &opts) {
            Ok(r) => {
                sum.classification = Some(r.classification);
                serde_json::to_value(r)?
            }
            Err(err) => error_json(err),
        };
        output::write_json(&dir.join("stability.json"), &stability)?;
    }
    let mut regret = serde_json::Map::new();
    if s.cfg.regret.global {
        let v = match s.global_regret(x) {
            Ok(r) => {
                sum.epsilon_global = Some(r.epsilon);
                serde_json::to_value(r)?
            }
            Err(err) => error_json(err),
        };
        regret.insert("global".into(), v);
    }
    if s.cfg.regret.local {
        let v = match local_regret(&s.game, x, &s.solver_config(e)) {
            Ok(r) if x.is_finite() => {
                sum.epsilon_local = Some(r.epsilon);
                serde_json::to_value(r)?
            }
            Ok(_) => error_json("profile is not finite"),
            Err(err) => error_json(err),
        };
        regret.insert("local".into(), v);
    }
    output::write_json(&dir.join("regret.json"), &regret)
}

fn run_one(s: &Setup, e: &SolverEntry, dir: &Path) -> anyhow::Result<SolverSummary> {
    let mut sum = SolverSummary::ok(e.solver);
    let x = if e.solver == SolverName::Brd {
        let g = s.brd_grid(e);
        let r = brd_solve(&s.game, &s.grid(&g), &g.brd(s.cfg.seed), None)?;
        output::write_text(&dir.join("rounds.csv"), &output::rounds_csv(&r))?;
        sum.iterations = Some(r.round_eps.len());
        r.profile
    } else {
        let t = gradient_run(s, e, &s.solver_config(e), None)?;
        output::write_text(&dir.join("trace.csv"), &output::trace_csv(&t))?;
        sum.diverged = t.diverged();
        sum.converged = Some(t.converged);
        sum.iterations = Some(t.iterations);
        sum.stop = Some(t.stop.clone());
        t.final_profile
    };
    sum.final_profile = Some(x.as_slice().to_vec());
    analyse(s, e, &x, dir, &mut sum)?;
    Ok(sum)
}

fn finish(s: &Setup, summaries: Vec<SolverSummary>, timing: BTreeMap<&str, f64>) -> anyhow::Result<bool> {
    let ok = summaries.iter().all(|x| x.status == "ok");
    let summary = json!({ "game": s.label, "seed": s.cfg.seed, "solvers": summaries });
    output::write_json(&s.out.join("summary.json"), &summary)?;
    // Wall-clock data lives apart from the summary so reruns stay identical.
    let fastest = timing.values().cloned().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    let ratios: BTreeMap<&str, f64> = timing.iter().map(|(k, t)| (*k, t / fastest)).collect();
    output::write_json(&s.out.join("timing.json"), &json!({ "wall_seconds": timing, "ratio_to_fastest": ratios }))?;
    Ok(ok)
}

fn solver_dir(s: &Setup, e: &SolverEntry) -> anyhow::Result<PathBuf> {
    let dir = s.out.join(e.solver.name());
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

/// Returns whether every solver succeeded.
fn run(s: &Setup) -> anyhow::Result<bool> {
    let mut summaries = Vec::new();
    let mut timing = BTreeMap::new();
    for e in &s.cfg.solvers {
        let dir = solver_dir(s, e)?;
        let start = Instant::now();
        let sum = run_one(s, e, &dir).unwrap_or_else(|err| {
            eprintln!("{}: {err:#}", e.solver.name());
            SolverSummary::failed(e.solver, format!("{err:#}"))
        });
        timing.insert(e.solver.name(), start.elapsed().as_secs_f64());
        summaries.push(sum);
    }
    finish(s, summaries, timing)
}

/// Profiles reached by a solver and the solver-only wall time at which each
/// was reached.
type Checkpoints = Vec<(f64, ActionProfile)>;

/// A gradient solver split into `checkpoints` equal chunks; only the chunks
/// themselves are timed.
fn gradient_checkpoints(s: &Setup, e: &SolverEntry, sum: &mut SolverSummary) -> anyhow::Result<Checkpoints> {
    let c = s.solver_config(e);
    let chunk = c.max_iters.div_ceil(s.cfg.checkpoints);
    let mut x = c.initial_profile(s.game.tree())?;
    let mut out = vec![(0.0, x.clone())];
    let (mut elapsed, mut done) = (0.0, 0);
    while done < c.max_iters {
        let step = SolverConfig { max_iters: chunk.min(c.max_iters - done), ..c.clone() };
        let start = Instant::now();
        let t = gradient_run(s, e, &step, Some(x))?;
        elapsed += start.elapsed().as_secs_f64();
        done += t.iterations;
        x = t.final_profile.clone();
        out.push((elapsed, x.clone()));
        sum.stop = Some(t.stop.clone());
        sum.converged = Some(t.converged);
        sum.diverged = t.diverged();
        if t.stop != StopReason::MaxIters {
            break;
        }
    }
    sum.iterations = Some(done);
    Ok(out)
}

fn brd_checkpoints(s: &Setup, e: &SolverEntry, sum: &mut SolverSummary) -> anyhow::Result<Checkpoints> {
    let g = s.brd_grid(e);
    let mut out = Vec::new();
    let start = Instant::now();
    let mut record = |_: usize, best: &ActionProfile, _: f64| out.push((start.elapsed().as_secs_f64(), best.clone()));
    let r = brd_solve(&s.game, &s.grid(&g), &g.brd(s.cfg.seed), Some(&mut record))?;
    sum.iterations = Some(r.round_eps.len());
    Ok(out)
}

fn compare_one(s: &Setup, e: &SolverEntry, rows: &mut Vec<(String, f64, f64)>) -> anyhow::Result<SolverSummary> {
    let mut sum = SolverSummary::ok(e.solver);
    let points =
        if e.solver == SolverName::Brd { brd_checkpoints(s, e, &mut sum)? } else { gradient_checkpoints(s, e, &mut sum)? };
    for (t, x) in &points {
        let eps = s.global_regret(x).map_or(f64::NAN, |r| r.epsilon);
        rows.push((e.solver.name().to_string(), *t, eps));
    }
    let (_, x) = points.last().context("solver produced no profile")?;
    sum.final_profile = Some(x.as_slice().to_vec());
    sum.epsilon_global = rows.last().map(|r| r.2).filter(|v| v.is_finite());
    Ok(sum)
}

/// Returns whether every solver succeeded.
fn compare(s: &Setup) -> anyhow::Result<bool> {
    let mut summaries = Vec::new();
    let mut timing = BTreeMap::new();
    let mut rows = Vec::new();
    for e in &s.cfg.solvers {
        let before = rows.len();
        let sum = compare_one(s, e, &mut rows).unwrap_or_else(|err| {
            eprintln!("{}: {err:#}", e.solver.name());
            SolverSummary::failed(e.solver, format!("{err:#}"))
        });
        let solver_time = rows[before..].last().map_or(0.0, |r| r.1);
        timing.insert(e.solver.name(), solver_time);
        summaries.push(sum);
    }
    output::write_text(&s.out.join("regret_vs_time.csv"), &output::regret_vs_time_csv(&rows))?;
    finish(s, summaries, timing)
}
