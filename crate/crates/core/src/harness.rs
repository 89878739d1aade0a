//! Head-to-head solver comparisons, parameter sweeps, and trace replays.
//!
//! Fairness rule: within one comparison every solver consumes the same
//! [`EpochContext`](crate::solver::EpochContext) — one frozen link table,
//! one set of handover draws — and every report carries that context's
//! digest as proof. Sweeps regenerate scenarios from seeds, so two runs
//! of the same spec produce byte-identical tables (wall-clock runtime
//! columns aside).

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{HandoverMode, Scenario, SolveReport};
use crate::scenario::{self, generate_with_counts};
use crate::solver::ans::solve_ans;
use crate::solver::milp::solve_bnb_default;
use crate::solver::qlearn::{episodes_to_converge, solve_qlearn_detailed, LearnConfig};
use crate::solver::EpochContext;
use crate::{Error, Result};

/// Maps a vehicle's delay to a dimensionless satisfaction score
/// `1 / (1 + t / t_ref)`: 1 at zero delay, 0.5 at the reference delay,
/// falling toward 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityConfig {
    pub t_ref: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig { t_ref: 0.1 }
    }
}

impl UtilityConfig {
    pub fn vehicle_utility(&self, delay_s: f64) -> f64 {
        1.0 / (1.0 + delay_s / self.t_ref)
    }
}

/// The three solvers the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Milp,
    Ans,
    Qlearn,
}

impl SolverKind {
    pub fn all() -> [SolverKind; 3] {
        [SolverKind::Milp, SolverKind::Ans, SolverKind::Qlearn]
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Milp => "milp",
            SolverKind::Ans => "ans",
            SolverKind::Qlearn => "qlearn",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "milp" => Ok(SolverKind::Milp),
            "ans" => Ok(SolverKind::Ans),
            "qlearn" => Ok(SolverKind::Qlearn),
            other => Err(Error::ScenarioParse(format!(
                "unknown solver {other:?}; expected milp, ans, or qlearn"
            ))),
        }
    }
}

/// Runs one solver on a prebuilt context. The learning configuration is
/// ignored by the non-learning solvers.
pub fn run_solver(ctx: &EpochContext, kind: SolverKind, learn: &LearnConfig) -> Result<SolveReport> {
    match kind {
        SolverKind::Milp => solve_bnb_default(ctx),
        SolverKind::Ans => solve_ans(ctx),
        SolverKind::Qlearn => solve_qlearn_detailed(ctx, learn).map(|(report, _)| report),
    }
}

/// Head-to-head result on one scenario and epoch.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    /// One report per requested solver, same order.
    pub reports: Vec<SolveReport>,
    /// Digest of the frozen draws every solver consumed.
    pub draw_digest: u64,
    /// Relative total-delay gap of each solver against the first one.
    pub gaps_vs_first: Vec<f64>,
    /// Per-solver share of vehicles on each network.
    pub load_shares: Vec<Vec<f64>>,
    /// Episodes the learning solver needed to reach 90% of its final
    /// greedy score, when it ran.
    pub convergence_episodes: Option<u64>,
}

/// Runs the requested solvers head-to-head on one frozen epoch.
pub fn compare(
    s: &Scenario,
    epoch: u64,
    solvers: &[SolverKind],
    learn: &LearnConfig,
) -> Result<CompareReport> {
    let ctx = EpochContext::build(s, epoch)?;
    let mut reports = Vec::with_capacity(solvers.len());
    let mut convergence_episodes = None;
    for &kind in solvers {
        let report = match kind {
            SolverKind::Qlearn => {
                let (report, trained) = solve_qlearn_detailed(&ctx, learn)?;
                convergence_episodes = episodes_to_converge(&trained.curve);
                report
            }
            other => run_solver(&ctx, other, learn)?,
        };
        debug_assert_eq!(report.draw_digest, ctx.draw_digest);
        reports.push(report);
    }
    let first_delay = reports.first().map_or(0.0, |r| r.total_delay);
    let gaps_vs_first = reports
        .iter()
        .map(|r| {
            if first_delay > 0.0 {
                (r.total_delay - first_delay) / first_delay
            } else {
                0.0
            }
        })
        .collect();
    let load_shares = reports
        .iter()
        .map(|r| {
            let counts = r.assignment.counts();
            let assigned: usize = counts.iter().sum();
            counts
                .iter()
                .map(|&c| if assigned > 0 { c as f64 / assigned as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(CompareReport {
        reports,
        draw_digest: ctx.draw_digest,
        gaps_vs_first,
        load_shares,
        convergence_episodes,
    })
}

/// Shannon entropy (bits) of the assignment's load distribution; 0 for
/// an empty or single-network load, `log2(k)` for a perfectly even
/// spread over `k` networks.
pub fn load_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0) // a single-network load otherwise yields negative zero
}

/// Grid sweep specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    /// Candidate-network counts.
    pub n_values: Vec<usize>,
    /// Vehicle counts.
    pub v_values: Vec<usize>,
    /// Repetitions per cell; repetition `r` of every cell shares seed
    /// `seed_base + r`, pairing the comparisons across cells.
    pub repetitions: u64,
    pub solvers: Vec<SolverKind>,
    pub seed_base: u64,
    /// Handover mode stamped onto every generated scenario.
    pub handover_mode: HandoverMode,
    /// Direction-preference weight for generated scenarios.
    pub lambda: f64,
    pub learn: LearnConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            n_values: vec![2, 3, 4, 5],
            v_values: vec![5, 7, 9, 12],
            repetitions: 30,
            solvers: SolverKind::all().to_vec(),
            seed_base: 1000,
            handover_mode: HandoverMode::SampledPerDecision,
            // Small enough that the direction preference only settles
            // near-ties instead of overriding the latency ranking.
            lambda: 0.001,
            learn: LearnConfig::default(),
        }
    }
}

/// One sweep measurement; one row per (cell, repetition, solver).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub v: usize,
    pub rep: u64,
    pub solver: String,
    pub utility: f64,
    pub total_delay_s: f64,
    pub mean_latency_s: f64,
    pub runtime_s: f64,
    pub nodes: Option<u64>,
    pub episodes: Option<u64>,
    pub load_entropy: f64,
    pub feasible: bool,
}

/// Runs the sweep. Rows come out sorted by (n, v, rep, solver order as
/// requested); every solver within a repetition consumes the same frozen
/// context.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n in &spec.n_values {
        for &v in &spec.v_values {
            for rep in 0..spec.repetitions {
                let mut s = generate_with_counts(n, v, spec.seed_base + rep, spec.lambda)?;
                s.handover.mode = spec.handover_mode;
                let ctx = EpochContext::build(&s, 0)?;
                for &kind in &spec.solvers {
                    let report = run_solver(&ctx, kind, &spec.learn)?;
                    rows.push(row_from_report(n, v, rep, &report));
                }
            }
        }
    }
    Ok(rows)
}

fn row_from_report(n: usize, v: usize, rep: u64, report: &SolveReport) -> SweepRow {
    SweepRow {
        n,
        v,
        rep,
        solver: report.solver.clone(),
        utility: report.total_utility,
        total_delay_s: report.total_delay,
        mean_latency_s: report.mean_latency,
        runtime_s: report.solver_runtime + report.train_runtime.unwrap_or(0.0),
        nodes: report.nodes_explored,
        episodes: report.episodes,
        load_entropy: load_entropy(&report.assignment.counts()),
        feasible: report.feasible,
    }
}

/// Exact column set of the CSV export.
pub const CSV_HEADER: &str =
    "n,v,rep,solver,utility,total_delay_s,mean_latency_s,runtime_s,nodes,episodes,load_entropy,feasible";

fn fmt_float(x: f64) -> String {
    // Nine significant digits, locale-independent.
    format!("{x:.8e}")
}

/// Renders rows as CSV text with nine-significant-digit floats and empty
/// fields for measurements a solver does not produce.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let nodes = r.nodes.map_or(String::new(), |v| v.to_string());
        let episodes = r.episodes.map_or(String::new(), |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.v,
            r.rep,
            r.solver,
            fmt_float(r.utility),
            fmt_float(r.total_delay_s),
            fmt_float(r.mean_latency_s),
            fmt_float(r.runtime_s),
            nodes,
            episodes,
            fmt_float(r.load_entropy),
            r.feasible,
        ));
    }
    out
}

/// Blanks the wall-clock runtime column, the one field two otherwise
/// identical runs cannot reproduce.
pub fn mask_runtime_column(csv: &str) -> String {
    csv.lines()
        .enumerate()
        .map(|(idx, line)| {
            if idx == 0 {
                line.to_string()
            } else {
                let mut fields: Vec<&str> = line.split(',').collect();
                if fields.len() > 7 {
                    fields[7] = "-";
                }
                fields.join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn write_rows_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    std::fs::write(path, rows_to_csv(rows))?;
    Ok(())
}

/// JSON mirror of the CSV export, for consumers that prefer typed rows.
pub fn write_rows_json(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let text = serde_json::to_string_pretty(rows)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// One replayed trace frame: the epoch's scenario snapshot was solved and
/// the fleet re-attached to whatever the solver chose.
#[derive(Debug, Clone, Serialize)]
pub struct TraceFrame {
    pub epoch: u64,
    pub report: SolveReport,
}

/// Replays a mobility trace: each sampled instant is solved with the
/// attachments the previous frame's assignment produced, so handover
/// costs accumulate realistically across the run.
pub fn trace_run(
    base: &Scenario,
    trace_path: &Path,
    kind: SolverKind,
    learn: &LearnConfig,
) -> Result<Vec<TraceFrame>> {
    let snapshots = scenario::ingest_trace(base, trace_path)?;
    let mut attachments: Vec<usize> = base.vehicles.iter().map(|v| v.current_network).collect();
    let mut frames = Vec::with_capacity(snapshots.len());
    for mut snap in snapshots {
        for (v, &a) in snap.vehicles.iter_mut().zip(&attachments) {
            v.current_network = a;
        }
        let epoch = snap.epoch;
        let ctx = EpochContext::build(&snap, epoch)?;
        let report = run_solver(&ctx, kind, learn)?;
        for (idx, a) in attachments.iter_mut().enumerate() {
            if let Some(choice) = report.assignment.assignment_of(idx + 1) {
                *a = choice;
            }
        }
        frames.push(TraceFrame { epoch, report });
    }
    Ok(frames)
}
