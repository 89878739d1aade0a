//! Two-phase selection heuristic.
//!
//! Phase 1 scores every feasible network per vehicle, independently:
//! * safety traffic minimizes `T_ij - lambda * D_ij` (delay first, with a
//!   bonus for networks toward the destination);
//! * infotainment traffic maximizes `r_ij - lambda' * (1 - D_ij)` with
//!   `lambda' = lambda * 1e6`, i.e. one unit of misalignment costs one
//!   megabit per second of rate. Rate-seeking with an alignment tiebreak;
//!   the best starts at negative infinity so any feasible candidate wins.
//!
//! Ties resolve toward the lower network id. A vehicle whose only
//! feasible network is its current one simply stays.
//!
//! Phase 2 repairs capacity: each overloaded network keeps its
//! highest-priority roster (safety before infotainment, better phase-1
//! score first within a class) and evicts from the tail, one vehicle at a
//! time. An evicted vehicle cascades to its next-best feasible network
//! that still has room; with nowhere to go it reverts to its current
//! network, which absorbs fallbacks unconditionally.

use std::time::Instant;

use crate::model::{AppClass, AssignmentMatrix, SolveReport};
use crate::solver::{finish_report, EpochContext};
use crate::Result;

/// Phase-1 outcome for one vehicle.
#[derive(Debug, Clone)]
pub struct VehicleChoice {
    /// Chosen network id.
    pub network: usize,
    /// Feasible networks in descending preference order.
    pub preferences: Vec<usize>,
    /// Eviction keep-key: lower keeps its slot longer within its class.
    pub keep_key: f64,
}

/// Scores one vehicle's feasible networks and picks the best.
/// Exposed for tests; `solve_ans` drives it across the fleet.
pub fn select_network(ctx: &EpochContext, vehicle: usize) -> Result<VehicleChoice> {
    let v = &ctx.scenario.vehicles[vehicle - 1];
    let lambda = ctx.scenario.lambda;
    // (score, network id): lower score is better for both classes after
    // negating the infotainment objective.
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for i in ctx.mask.feasible_networks(vehicle) {
        let link = ctx.links.get(i, vehicle);
        let score = match v.app {
            AppClass::Safety => ctx.realized_delay(i, vehicle)? - lambda * link.alignment,
            AppClass::Infotainment => {
                let rate = if link.in_coverage {
                    link.rate
                } else {
                    link.raw_rate(v.bandwidth_demand, ctx.scenario.radio.shannon_efficiency)
                };
                -(rate - lambda * 1e6 * (1.0 - link.alignment))
            }
        };
        scored.push((score, i));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (best_score, network) = scored[0];
    Ok(VehicleChoice {
        network,
        preferences: scored.iter().map(|&(_, i)| i).collect(),
        keep_key: best_score,
    })
}

/// Phase 2: capacity repair. Processes networks in ascending id order;
/// while one is over its bandwidth or compute budget, evicts the
/// lowest-priority vehicle on it and cascades that vehicle to its
/// next-preferred network with room, falling back to its current network.
///
/// Vehicles whose current network is the overloaded one are never evicted
/// from it (evicting them would only revert them right back); on fresh
/// scenarios, where every vehicle starts on network 0 and network 0 is
/// provisioned for the whole fleet, this rule never fires.
pub(crate) fn allocate_and_evict(
    ctx: &EpochContext,
    choices: &mut [usize],
    per_vehicle: &[VehicleChoice],
) {
    let s = ctx.scenario;
    let n_networks = ctx.n_networks();
    let mut bw_used = vec![0.0; n_networks];
    let mut cp_used = vec![0.0; n_networks];
    for (idx, &i) in choices.iter().enumerate() {
        bw_used[i] += s.vehicles[idx].bandwidth_demand;
        cp_used[i] += s.vehicles[idx].compute_grant_demand;
    }
    let over = |bw: &[f64], cp: &[f64], i: usize| {
        bw[i] > s.networks[i].bandwidth_total || cp[i] > s.networks[i].compute_total
    };

    for i in 0..n_networks {
        while over(&bw_used, &cp_used, i) {
            // Keep-priority order: safety first, better key first, then
            // vehicle id for determinism. Eviction walks from the tail.
            let mut roster: Vec<usize> = (1..=choices.len()).filter(|&j| choices[j - 1] == i).collect();
            roster.sort_by(|&a, &b| {
                let class = |j: usize| matches!(s.vehicles[j - 1].app, AppClass::Infotainment) as u8;
                class(a)
                    .cmp(&class(b))
                    .then(per_vehicle[a - 1].keep_key.total_cmp(&per_vehicle[b - 1].keep_key))
                    .then(a.cmp(&b))
            });
            let Some(&victim) = roster.iter().rev().find(|&&j| s.vehicles[j - 1].current_network != i)
            else {
                break; // only irrevocable stayers left; report stays honest
            };
            let (bw, cp) = (s.vehicles[victim - 1].bandwidth_demand, s.vehicles[victim - 1].compute_grant_demand);
            bw_used[i] -= bw;
            cp_used[i] -= cp;
            let next = per_vehicle[victim - 1]
                .preferences
                .iter()
                .copied()
                .find(|&k| {
                    k != i
                        && bw_used[k] + bw <= s.networks[k].bandwidth_total
                        && cp_used[k] + cp <= s.networks[k].compute_total
                })
                .unwrap_or(s.vehicles[victim - 1].current_network);
            choices[victim - 1] = next;
            bw_used[next] += bw;
            cp_used[next] += cp;
        }
    }
}

/// Runs both phases and evaluates the result.
pub fn solve_ans(ctx: &EpochContext) -> Result<SolveReport> {
    let started = Instant::now();
    let mut per_vehicle = Vec::with_capacity(ctx.n_vehicles());
    for j in 1..=ctx.n_vehicles() {
        per_vehicle.push(select_network(ctx, j)?);
    }
    let mut choices: Vec<usize> = per_vehicle.iter().map(|c| c.network).collect();
    allocate_and_evict(ctx, &mut choices, &per_vehicle);
    let picks: Vec<Option<usize>> = choices.into_iter().map(Some).collect();
    let assignment = AssignmentMatrix::from_choices(ctx.scenario, &picks)?;
    finish_report(ctx, "ans", assignment, started)
}
