//! Command-line front end: generate scenarios, run solvers, sweep grids,
//! and replay mobility traces.
//!
//! Exit codes: 0 on success, 1 for input problems (unreadable files,
//! invalid scenarios, malformed traces), 2 for solver failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use v2x_select::harness::{self, SolverKind, SweepSpec};
use v2x_select::model::{HandoverMode, Scenario};
use v2x_select::scenario::{generate, generate_with_counts, DensityClass, GenParams};
use v2x_select::solver::qlearn::{self, LearnConfig};
use v2x_select::solver::EpochContext;
use v2x_select::Error;

#[derive(Parser)]
#[command(name = "v2xsel", version, about = "Network selection solvers for vehicular fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded scenario as TOML.
    Gen(GenArgs),
    /// Solve one scenario with one solver; prints a JSON report.
    Solve(SolveArgs),
    /// Run several solvers head-to-head on one frozen epoch.
    Compare(CompareArgs),
    /// Sweep a (networks x vehicles x repetitions) grid to CSV/JSON.
    Sweep(SweepArgs),
    /// Replay a mobility trace, re-solving and re-attaching per sample.
    TraceRun(TraceRunArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Candidate networks, excluding the current attachment.
    #[arg(long, default_value_t = 3)]
    candidates: usize,
    /// Exact vehicle count; area is sized for medium density.
    #[arg(long)]
    vehicles: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    area_km2: f64,
    /// low | medium | high (100/200/300 vehicles per square km).
    #[arg(long, default_value = "medium")]
    density: String,
    #[arg(long, default_value_t = 0.5)]
    safety_ratio: f64,
    #[arg(long, default_value_t = 0.005)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// milp | ans | qlearn
    #[arg(long, default_value = "milp")]
    solver: String,
    #[arg(long)]
    epoch: Option<u64>,
    /// Override the scenario's handover mode: sampled | expected.
    #[arg(long)]
    handover: Option<String>,
    #[command(flatten)]
    learn: LearnArgs,
    /// Write the trained policy tables (qlearn only).
    #[arg(long)]
    save_policy: Option<PathBuf>,
    /// Skip training and assign from saved tables (qlearn only).
    #[arg(long)]
    load_policy: Option<PathBuf>,
    /// Output path for the JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated list, e.g. milp,ans,qlearn.
    #[arg(long, default_value = "milp,ans,qlearn")]
    solvers: String,
    #[arg(long)]
    epoch: Option<u64>,
    #[arg(long)]
    handover: Option<String>,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated candidate-network counts.
    #[arg(long, default_value = "2,3,4,5")]
    n_values: String,
    /// Comma-separated vehicle counts.
    #[arg(long, default_value = "5,7,9,12")]
    v_values: String,
    #[arg(long, default_value_t = 30)]
    reps: u64,
    #[arg(long, default_value = "milp,ans,qlearn")]
    solvers: String,
    #[arg(long, default_value_t = 1000)]
    seed_base: u64,
    /// sampled | expected
    #[arg(long, default_value = "sampled")]
    handover: String,
    #[arg(long, default_value_t = 0.005)]
    lambda: f64,
    #[command(flatten)]
    learn: LearnArgs,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Optional JSON mirror of the rows.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct TraceRunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "ans")]
    solver: String,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Training episodes for the learning solver.
    #[arg(long, default_value_t = 500)]
    episodes: u64,
    /// Exploration seed for the learning solver.
    #[arg(long, default_value_t = 0)]
    learn_seed: u64,
}

impl LearnArgs {
    fn config(&self) -> LearnConfig {
        LearnConfig { episodes: self.episodes, rng_seed: self.learn_seed, ..LearnConfig::default() }
    }
}

fn parse_handover(text: &str) -> Result<HandoverMode, Error> {
    match text {
        "sampled" => Ok(HandoverMode::SampledPerDecision),
        "expected" => Ok(HandoverMode::ExpectedValue),
        other => Err(Error::ScenarioParse(format!(
            "unknown handover mode {other:?}; expected sampled or expected"
        ))),
    }
}

fn parse_density(text: &str) -> Result<DensityClass, Error> {
    match text {
        "low" => Ok(DensityClass::Low),
        "medium" => Ok(DensityClass::Medium),
        "high" => Ok(DensityClass::High),
        other => Err(Error::ScenarioParse(format!(
            "unknown density {other:?}; expected low, medium, or high"
        ))),
    }
}

fn parse_solvers(text: &str) -> Result<Vec<SolverKind>, Error> {
    text.split(',').map(|s| SolverKind::from_str(s.trim())).collect()
}

fn parse_usizes(text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::ScenarioParse(format!("bad integer {s:?} in list")))
        })
        .collect()
}

fn load_scenario(path: &Path, handover: Option<&str>, epoch: Option<u64>) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut s = Scenario::from_toml(&text)?;
    if let Some(mode) = handover {
        s.handover.mode = parse_handover(mode)?;
    }
    if let Some(e) = epoch {
        s.epoch = e;
    }
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen(a) => {
            let s = match a.vehicles {
                Some(v) => generate_with_counts(a.candidates, v, a.seed, a.lambda)?,
                None => generate(&GenParams {
                    candidates: a.candidates,
                    area_km2: a.area_km2,
                    density: parse_density(&a.density)?,
                    safety_ratio: a.safety_ratio,
                    lambda: a.lambda,
                    seed: a.seed,
                })?,
            };
            emit(a.out.as_deref(), &s.to_toml()?)
        }
        Command::Solve(a) => {
            let s = load_scenario(&a.scenario, a.handover.as_deref(), a.epoch)?;
            let kind = SolverKind::from_str(&a.solver)?;
            let learn = a.learn.config();
            let ctx = EpochContext::build(&s, s.epoch)?;
            let report = match kind {
                SolverKind::Qlearn if a.load_policy.is_some() => {
                    let tables = qlearn::load_tables(a.load_policy.as_deref().unwrap())?;
                    qlearn::solve_from_tables(&ctx, &tables)?
                }
                SolverKind::Qlearn => {
                    let (report, trained) = qlearn::solve_qlearn_detailed(&ctx, &learn)?;
                    if let Some(path) = &a.save_policy {
                        qlearn::save_tables(path, &trained.tables)?;
                    }
                    report
                }
                other => harness::run_solver(&ctx, other, &learn)?,
            };
            emit(a.out.as_deref(), &serde_json::to_string_pretty(&report).map_err(Error::from)?)
        }
        Command::Compare(a) => {
            let s = load_scenario(&a.scenario, a.handover.as_deref(), a.epoch)?;
            let solvers = parse_solvers(&a.solvers)?;
            let report = harness::compare(&s, s.epoch, &solvers, &a.learn.config())?;
            emit(a.out.as_deref(), &serde_json::to_string_pretty(&report).map_err(Error::from)?)
        }
        Command::Sweep(a) => {
            let spec = SweepSpec {
                n_values: parse_usizes(&a.n_values)?,
                v_values: parse_usizes(&a.v_values)?,
                repetitions: a.reps,
                solvers: parse_solvers(&a.solvers)?,
                seed_base: a.seed_base,
                handover_mode: parse_handover(&a.handover)?,
                lambda: a.lambda,
                learn: a.learn.config(),
            };
            let rows = harness::sweep(&spec)?;
            if let Some(path) = &a.json {
                harness::write_rows_json(path, &rows)?;
            }
            match &a.csv {
                Some(path) => harness::write_rows_csv(path, &rows)?,
                None => print!("{}", harness::rows_to_csv(&rows)),
            }
            Ok(())
        }
        Command::TraceRun(a) => {
            let s = load_scenario(&a.scenario, None, None)?;
            let kind = SolverKind::from_str(&a.solver)?;
            let frames = harness::trace_run(&s, &a.trace, kind, &a.learn.config())?;
            emit(a.out.as_deref(), &serde_json::to_string_pretty(&frames).map_err(Error::from)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidScenario(_)
                | Error::ScenarioParse(_)
                | Error::Trace { .. }
                | Error::Io(_)
                | Error::Serialize(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
