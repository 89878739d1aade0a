//! The three assignment solvers and the epoch context they share.
//!
//! Solvers never draw randomness of their own from the channel: they all
//! consume one [`EpochContext`] holding the frozen link table and the
//! frozen handover draws for the epoch, so head-to-head comparisons are
//! decided by the algorithms, not by luck of the draw. The context digest
//! is recorded in every report to certify that.

pub mod ans;
pub mod milp;
pub mod qlearn;

use std::time::Instant;

use crate::delay::{self, handover_digest};
use crate::feasibility::{assignment_valid, FeasibilityMask};
use crate::harness::UtilityConfig;
use crate::model::{check_scenario, AssignmentMatrix, HandoverMode, Scenario, SolveReport};
use crate::radio::LinkTable;
use crate::seedmix::splitmix64;
use crate::Result;

/// Frozen view of one decision epoch: channel states, feasibility, and
/// the digest of every stochastic draw the epoch exposes.
#[derive(Debug, Clone)]
pub struct EpochContext<'a> {
    pub scenario: &'a Scenario,
    pub epoch: u64,
    pub links: LinkTable,
    pub mask: FeasibilityMask,
    /// Combined hash of the link table and the realized handover draws.
    pub draw_digest: u64,
}

impl<'a> EpochContext<'a> {
    /// Validates the scenario and freezes the epoch's channel.
    pub fn build(scenario: &'a Scenario, epoch: u64) -> Result<Self> {
        check_scenario(scenario)?;
        let links = LinkTable::build(scenario, epoch)?;
        let mask = FeasibilityMask::build(scenario, &links);
        let draw_digest = splitmix64(links.digest() ^ handover_digest(scenario, epoch).rotate_left(17));
        Ok(EpochContext { scenario, epoch, links, mask, draw_digest })
    }

    /// Realized delay of assigning vehicle `j` to network `i` at its
    /// demanded grants, in the scenario's handover mode.
    pub fn realized_delay(&self, network: usize, vehicle: usize) -> Result<f64> {
        let v = &self.scenario.vehicles[vehicle - 1];
        let grants = (v.bandwidth_demand, v.compute_grant_demand);
        Ok(delay::pair_delay(self.scenario, &self.links, network, vehicle, grants, self.epoch)?.t_total)
    }

    /// Deterministic planning cost of the pair: same delay with the
    /// handover charged at its expected value.
    pub fn planned_cost(&self, network: usize, vehicle: usize) -> Result<f64> {
        let v = &self.scenario.vehicles[vehicle - 1];
        let grants = (v.bandwidth_demand, v.compute_grant_demand);
        Ok(delay::pair_delay_in_mode(
            self.scenario,
            &self.links,
            network,
            vehicle,
            grants,
            self.epoch,
            HandoverMode::ExpectedValue,
        )?
        .t_total)
    }

    pub fn n_networks(&self) -> usize {
        self.scenario.network_count()
    }

    pub fn n_vehicles(&self) -> usize {
        self.scenario.vehicle_count()
    }
}

/// Evaluates a finished assignment into a [`SolveReport`]: realized
/// per-vehicle delays, utility, validity, and budget violations.
pub(crate) fn finish_report(
    ctx: &EpochContext,
    solver: &str,
    assignment: AssignmentMatrix,
    started: Instant,
) -> Result<SolveReport> {
    let solver_runtime = started.elapsed().as_secs_f64();
    let per_vehicle_delay = delay::per_vehicle_delays(ctx.scenario, &ctx.links, &assignment, ctx.epoch)?;
    let ucfg = UtilityConfig::default();
    let mut total_delay = 0.0;
    let mut total_utility = 0.0;
    let mut assigned = 0usize;
    let mut budget_violations = Vec::new();
    for (idx, d) in per_vehicle_delay.iter().enumerate() {
        if let Some(t) = d {
            total_delay += t;
            total_utility += ucfg.vehicle_utility(*t);
            assigned += 1;
            if *t > ctx.scenario.vehicles[idx].app.latency_budget() {
                budget_violations.push(idx + 1);
            }
        }
    }
    let mean_latency = if assigned > 0 { total_delay / assigned as f64 } else { 0.0 };
    let feasible = assignment_valid(ctx.scenario, &ctx.mask, &assignment);
    let unassigned_vehicles = assignment.unassigned();
    Ok(SolveReport {
        solver: solver.to_string(),
        assignment,
        per_vehicle_delay,
        total_delay,
        total_utility,
        mean_latency,
        solver_runtime,
        nodes_explored: None,
        episodes: None,
        train_runtime: None,
        feasible,
        unassigned_vehicles,
        optimal: None,
        planned_objective: None,
        budget_violations,
        draw_digest: ctx.draw_digest,
    })
}
