//! Feasibility screening: which (network, vehicle) pairs may be assigned,
//! and whether a full assignment respects every capacity budget.
//!
//! A vehicle's current network is always allowed, whatever the screens
//! say; that keeps the selection problem solvable by construction (the
//! do-nothing choice exists, costs no handover, and its delay stays
//! defined). Pairs where the fallback failed a screen are flagged so
//! reports can surface the degraded link.

use serde::{Deserialize, Serialize};

use crate::model::{AssignmentMatrix, RadioParams, Scenario};
use crate::radio::{LinkState, LinkTable};

/// A screening rule a pair failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenFailure {
    /// Received power below `power_threshold_dbm`.
    Power,
    /// SINR below `sinr_threshold_db`.
    Sinr,
    /// Heading angle above `angle_threshold_deg` (only when the heading
    /// is defined; parked vehicles bypass this screen).
    Direction,
}

/// Screens one link; the empty list means the pair passes.
pub fn pair_screen(link: &LinkState, r: &RadioParams) -> Vec<ScreenFailure> {
    let mut failures = Vec::new();
    if link.received_power_dbm < r.power_threshold_dbm {
        failures.push(ScreenFailure::Power);
    }
    if link.sinr_db < r.sinr_threshold_db {
        failures.push(ScreenFailure::Sinr);
    }
    if link.heading_defined && link.angle_deg > r.angle_threshold_deg {
        failures.push(ScreenFailure::Direction);
    }
    failures
}

/// Does the pair pass every screen on its own merits (ignoring the
/// current-network fallback rule)?
pub fn pair_feasible(link: &LinkState, r: &RadioParams) -> bool {
    pair_screen(link, r).is_empty()
}

/// Boolean feasibility of every (network, vehicle) pair, plus the flags
/// raised where a vehicle's fallback network failed its screens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityMask {
    n_networks: usize,
    n_vehicles: usize,
    allowed: Vec<bool>,
    /// `(vehicle, failures)` for fallback pairs that were admitted despite
    /// failing screens.
    pub fallback_flags: Vec<(usize, Vec<ScreenFailure>)>,
}

impl FeasibilityMask {
    pub fn build(s: &Scenario, links: &LinkTable) -> FeasibilityMask {
        let n_networks = s.network_count();
        let n_vehicles = s.vehicle_count();
        let mut allowed = vec![false; n_networks * n_vehicles];
        let mut fallback_flags = Vec::new();
        for j in 1..=n_vehicles {
            let current = s.vehicles[j - 1].current_network;
            for i in 0..n_networks {
                let failures = pair_screen(links.get(i, j), &s.radio);
                let mut ok = failures.is_empty();
                if i == current && !ok {
                    ok = true;
                    fallback_flags.push((j, failures));
                }
                allowed[i * n_vehicles + (j - 1)] = ok;
            }
        }
        FeasibilityMask { n_networks, n_vehicles, allowed, fallback_flags }
    }

    /// May vehicle `j` be assigned to network `i`?
    pub fn allowed(&self, network: usize, vehicle: usize) -> bool {
        self.allowed[network * self.n_vehicles + (vehicle - 1)]
    }

    /// Ids of the networks vehicle `j` may be assigned to, ascending.
    pub fn feasible_networks(&self, vehicle: usize) -> Vec<usize> {
        (0..self.n_networks).filter(|&i| self.allowed(i, vehicle)).collect()
    }

    pub fn n_networks(&self) -> usize {
        self.n_networks
    }

    pub fn n_vehicles(&self) -> usize {
        self.n_vehicles
    }
}

/// Do the granted bandwidth and compute respect every network's budgets?
/// Exact boundary loads pass (`used == total` is within budget).
pub fn capacity_ok(s: &Scenario, m: &AssignmentMatrix) -> bool {
    overloaded_networks(s, m).is_empty()
}

/// Networks whose bandwidth or compute budget the assignment exceeds.
pub fn overloaded_networks(s: &Scenario, m: &AssignmentMatrix) -> Vec<usize> {
    let (bw, cp) = m.loads();
    s.networks
        .iter()
        .filter(|n| bw[n.id] > n.bandwidth_total || cp[n.id] > n.compute_total)
        .map(|n| n.id)
        .collect()
}

/// Full assignment validity: one network per vehicle at most, every
/// assigned pair admitted by the mask, and all capacity budgets held.
pub fn assignment_valid(s: &Scenario, mask: &FeasibilityMask, m: &AssignmentMatrix) -> bool {
    assignment_violations(s, mask, m).is_empty()
}

/// Human-readable list of everything wrong with an assignment; empty for
/// valid assignments. The column-sum rule is structural in
/// `AssignmentMatrix` but is still verified here against the dense form.
pub fn assignment_violations(s: &Scenario, mask: &FeasibilityMask, m: &AssignmentMatrix) -> Vec<String> {
    let mut out = Vec::new();
    let dense = m.to_dense();
    for j in 1..=m.n_vehicles() {
        let col_sum: usize = dense.iter().map(|row| row[j - 1] as usize).sum();
        if col_sum > 1 {
            out.push(format!("vehicle {j}: assigned to {col_sum} networks"));
        }
    }
    for j in 1..=m.n_vehicles() {
        if let Some(i) = m.assignment_of(j) {
            if !mask.allowed(i, j) {
                out.push(format!("vehicle {j}: assigned to screened-out network {i}"));
            }
        }
    }
    let (bw, cp) = m.loads();
    for n in &s.networks {
        if bw[n.id] > n.bandwidth_total {
            out.push(format!(
                "network {}: bandwidth {} Hz exceeds budget {} Hz",
                n.id, bw[n.id], n.bandwidth_total
            ));
        }
        if cp[n.id] > n.compute_total {
            out.push(format!(
                "network {}: compute {} cycles/s exceeds budget {} cycles/s",
                n.id, cp[n.id], n.compute_total
            ));
        }
    }
    out
}
