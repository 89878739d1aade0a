//! Dissemination delay model. The delay a vehicle pays on a network is
//!
//! `T_ij = T_trans + T_comp + T_handover`
//!
//! where transmission time covers serialization over the Shannon rate, the
//! network's fixed latency, and a power-induced term
//! `(P_idle * sigma + P_c * T_c) / P_s`; computation time is the offloaded
//! demand over the compute grant; and handover time is zero when the
//! vehicle stays on its current network and truncated-normal otherwise.
//!
//! Handover draws are frozen per `(seed, vehicle, candidate, epoch)`: every
//! solver that evaluates the same pair at the same epoch sees the same
//! value, in either handover mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{HandoverMode, NetworkNode, Scenario, VehicleAgent};
use crate::radio::{data_rate, LinkState, LinkTable};
use crate::seedmix::{mix, TAG_HANDOVER};
use crate::{Error, Result};

/// Component breakdown of one pair delay, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub t_trans: f64,
    pub t_comp: f64,
    pub t_handover: f64,
    pub t_total: f64,
}

/// Transmission time of vehicle `v`'s message over `rate` bits/s on
/// network `n`, including the network's base latency and power-induced
/// term. A non-positive rate means the link is unusable; the delay is an
/// error, never a number.
pub fn transmission_time(v: &VehicleAgent, n: &NetworkNode, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::LinkUnusable { network: n.id, vehicle: v.id });
    }
    let power_induced =
        (n.idle_power * n.idle_window_s + n.compute_power * n.compute_service_time) / n.stable_tx_power;
    Ok(v.data_size / rate + n.base_latency + power_induced)
}

/// Computation time of vehicle `v`'s offloaded demand over a grant of
/// `compute_grant` cycles/s. Zero demand costs zero regardless of the
/// grant; positive demand with no grant is an error.
pub fn computation_time(v: &VehicleAgent, compute_grant: f64) -> Result<f64> {
    if v.compute_demand == 0.0 {
        return Ok(0.0);
    }
    if !(compute_grant > 0.0) {
        return Err(Error::NoComputeGrant { vehicle: v.id, demand: v.compute_demand });
    }
    Ok(v.compute_demand / compute_grant)
}

/// Handover delay for vehicle `j` moving from attachment `from` to
/// `candidate` at `epoch`, in the given mode. Exactly zero when staying
/// put; otherwise the model mean (expected mode) or a truncated-normal
/// draw frozen per `(seed, vehicle, candidate, epoch)` (sampled mode).
/// The draw key does not involve `from`: what is frozen is the cost of
/// switching onto a candidate at an epoch.
pub fn handover_cost_between(
    s: &Scenario,
    vehicle: usize,
    from: usize,
    candidate: usize,
    epoch: u64,
    mode: HandoverMode,
) -> Result<f64> {
    if candidate >= s.network_count() {
        return Err(Error::UnknownNetwork(candidate));
    }
    if candidate == from {
        return Ok(0.0);
    }
    let h = &s.handover;
    match mode {
        HandoverMode::ExpectedValue => Ok(h.mean_s),
        HandoverMode::SampledPerDecision => {
            if h.std_s == 0.0 {
                return Ok(h.mean_s.max(0.0));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[
                s.rng_seed,
                TAG_HANDOVER,
                vehicle as u64,
                candidate as u64,
                epoch,
            ]));
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok((h.mean_s + h.std_s * z).max(0.0))
        }
    }
}

/// Handover delay relative to the vehicle's scenario attachment.
pub fn handover_delay_in_mode(
    s: &Scenario,
    vehicle: usize,
    candidate: usize,
    epoch: u64,
    mode: HandoverMode,
) -> Result<f64> {
    let v = s.vehicle(vehicle)?;
    handover_cost_between(s, vehicle, v.current_network, candidate, epoch, mode)
}

/// Handover delay in the scenario's own mode.
pub fn handover_delay(s: &Scenario, vehicle: usize, candidate: usize, epoch: u64) -> Result<f64> {
    handover_delay_in_mode(s, vehicle, candidate, epoch, s.handover.mode)
}

/// Rate the pair actually delivers under a bandwidth grant. In-coverage
/// pairs use the Shannon rate over the grant. The vehicle's current
/// network is usable even out of coverage (the always-available fallback;
/// feasibility flags it, the delay stays defined). Any other
/// out-of-coverage pair is unusable.
fn effective_rate(s: &Scenario, link: &LinkState, v: &VehicleAgent, bandwidth_grant: f64) -> Result<f64> {
    if !(bandwidth_grant > 0.0) {
        return Err(Error::LinkUnusable { network: link.network, vehicle: v.id });
    }
    if link.in_coverage || link.network == v.current_network {
        Ok(data_rate(bandwidth_grant, link.sinr_db, s.radio.shannon_efficiency))
    } else {
        Err(Error::LinkUnusable { network: link.network, vehicle: v.id })
    }
}

/// Full delay of assigning vehicle `j` to network `i` under the given
/// `(bandwidth, compute)` grants, with the handover charged in `mode`.
pub fn pair_delay_in_mode(
    s: &Scenario,
    links: &LinkTable,
    network: usize,
    vehicle: usize,
    grants: (f64, f64),
    epoch: u64,
    mode: HandoverMode,
) -> Result<DelayBreakdown> {
    let v = s.vehicle(vehicle)?;
    let n = s.networks.get(network).ok_or(Error::UnknownNetwork(network))?;
    let link = links.get(network, vehicle);
    let rate = effective_rate(s, link, v, grants.0)?;
    let t_trans = transmission_time(v, n, rate)?;
    let t_comp = computation_time(v, grants.1)?;
    let t_handover = handover_delay_in_mode(s, vehicle, network, epoch, mode)?;
    Ok(DelayBreakdown { t_trans, t_comp, t_handover, t_total: t_trans + t_comp + t_handover })
}

/// Full delay of the pair in the scenario's handover mode.
pub fn pair_delay(
    s: &Scenario,
    links: &LinkTable,
    network: usize,
    vehicle: usize,
    grants: (f64, f64),
    epoch: u64,
) -> Result<DelayBreakdown> {
    pair_delay_in_mode(s, links, network, vehicle, grants, epoch, s.handover.mode)
}

/// Sum of realized pair delays over every assigned vehicle, in ascending
/// vehicle order (the canonical summation order; every solver reports
/// objectives summed this way so equal assignments give bit-equal totals).
pub fn total_objective(
    s: &Scenario,
    links: &LinkTable,
    assignment: &crate::model::AssignmentMatrix,
    epoch: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for j in 1..=s.vehicle_count() {
        if let Some(i) = assignment.assignment_of(j) {
            let grants = (assignment.bandwidth_grant(i, j), assignment.compute_grant(i, j));
            total += pair_delay(s, links, i, j, grants, epoch)?.t_total;
        }
    }
    Ok(total)
}

/// Realized per-vehicle delays under an assignment; `None` for unassigned
/// vehicles.
pub fn per_vehicle_delays(
    s: &Scenario,
    links: &LinkTable,
    assignment: &crate::model::AssignmentMatrix,
    epoch: u64,
) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::with_capacity(s.vehicle_count());
    for j in 1..=s.vehicle_count() {
        match assignment.assignment_of(j) {
            Some(i) => {
                let grants = (assignment.bandwidth_grant(i, j), assignment.compute_grant(i, j));
                out.push(Some(pair_delay(s, links, i, j, grants, epoch)?.t_total));
            }
            None => out.push(None),
        }
    }
    Ok(out)
}

/// FNV-1a hash over the realized handover draw of every (vehicle,
/// candidate) pair at `epoch`, in the scenario's mode. Combined with the
/// link-table digest this freezes everything stochastic a solver consumes.
pub fn handover_digest(s: &Scenario, epoch: u64) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
    };
    for j in 1..=s.vehicle_count() {
        for i in 0..s.network_count() {
            let d = handover_delay(s, j, i, epoch).unwrap_or(f64::NAN);
            eat(d.to_bits());
        }
    }
    h
}
