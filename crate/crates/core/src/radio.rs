//! Radio channel model: log-distance path loss with seeded shadowing,
//! SINR, Shannon data rate, and the geometric direction quantities used
//! by feasibility screening and heuristic scoring.
//!
//! Two distinct direction quantities exist and must not be conflated:
//! * the screening angle `theta_ij` is measured between the vehicle's
//!   heading (its velocity) and the bearing to the network;
//! * the alignment score `D_ij` is the cosine between the bearing to the
//!   vehicle's destination and the bearing to the network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{vec2, NetworkNode, RadioParams, Scenario, VehicleAgent};
use crate::seedmix::{mix, TAG_SHADOWING};
use crate::{Error, Result};

/// Log-distance path loss in dB at `distance` metres. Distances below the
/// reference distance clamp to it (near-field guard).
pub fn path_loss_db(r: &RadioParams, distance: f64) -> f64 {
    let d = distance.max(r.reference_distance);
    r.reference_loss_db + 10.0 * r.pathloss_exponent * (d / r.reference_distance).log10()
}

/// Shadowing draw in dB for pair `(network, vehicle)` at `epoch`, frozen
/// by the scenario seed. Exactly zero when `sigma_db` is zero, so
/// noise-free configurations stay analytic.
pub fn shadowing_db(seed: u64, network: usize, vehicle: usize, epoch: u64, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[
        seed,
        TAG_SHADOWING,
        network as u64,
        vehicle as u64,
        epoch,
    ]));
    let z: f64 = StandardNormal.sample(&mut rng);
    sigma_db * z
}

/// Received power in dBm under log-distance path loss plus shadowing.
pub fn received_power_dbm(n: &NetworkNode, v: &VehicleAgent, r: &RadioParams, shadow_db: f64) -> f64 {
    let d = vec2::dist(n.position, v.position);
    n.tx_power_dbm - path_loss_db(r, d) + shadow_db
}

/// SINR in dB. The model is noise-limited: no interference term, so this
/// is received power over the noise floor.
pub fn sinr_db(received_dbm: f64, noise_floor_dbm: f64) -> f64 {
    received_dbm - noise_floor_dbm
}

/// Shannon rate in bits/s over `bandwidth` Hz at `sinr_db`, scaled by the
/// efficiency factor. Strictly positive for any finite SINR.
pub fn data_rate(bandwidth: f64, sinr_db: f64, efficiency: f64) -> f64 {
    let sinr_linear = 10f64.powf(sinr_db / 10.0);
    efficiency * bandwidth * (1.0 + sinr_linear).log2()
}

/// Alignment `D_ij`: cosine between the vehicle-to-destination and
/// vehicle-to-network bearings, in [-1, 1].
pub fn direction_alignment(v: &VehicleAgent, n: &NetworkNode) -> Result<f64> {
    let to_dest = vec2::sub(v.destination, v.position);
    let to_net = vec2::sub(n.position, v.position);
    let denom = vec2::norm(to_dest) * vec2::norm(to_net);
    if denom == 0.0 {
        let reason = if vec2::norm(to_dest) == 0.0 {
            "destination coincides with position".to_string()
        } else {
            format!("network {} coincides with position", n.id)
        };
        return Err(Error::DirectionUndefined { vehicle: v.id, reason });
    }
    Ok((vec2::dot(to_dest, to_net) / denom).clamp(-1.0, 1.0))
}

/// Screening angle `theta_ij` in degrees between the vehicle's heading
/// and the bearing to the network.
pub fn heading_angle_deg(v: &VehicleAgent, n: &NetworkNode) -> Result<f64> {
    let to_net = vec2::sub(n.position, v.position);
    if vec2::norm(v.velocity) == 0.0 {
        return Err(Error::DirectionUndefined {
            vehicle: v.id,
            reason: "zero velocity".to_string(),
        });
    }
    if vec2::norm(to_net) == 0.0 {
        return Err(Error::DirectionUndefined {
            vehicle: v.id,
            reason: format!("network {} coincides with position", n.id),
        });
    }
    Ok(vec2::angle_deg(v.velocity, to_net))
}

/// Channel state of one (network, vehicle) pair at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub network: usize,
    pub vehicle: usize,
    /// Received power `P_ij` in dBm.
    pub received_power_dbm: f64,
    pub sinr_db: f64,
    /// Usable rate in bits/s over the vehicle's demanded bandwidth; zero
    /// when the pair is out of coverage.
    pub rate: f64,
    /// Alignment `D_ij`; 0 when undefined (degenerate geometry).
    pub alignment: f64,
    /// Screening angle `theta_ij` in degrees; 0 when the heading is
    /// undefined.
    pub angle_deg: f64,
    /// False when the vehicle's velocity is zero; the angle screen is
    /// bypassed in that case.
    pub heading_defined: bool,
    /// All screens passed: power, SINR, and (when defined) angle.
    pub in_coverage: bool,
}

impl LinkState {
    /// Shannon rate over the vehicle's demanded bandwidth regardless of
    /// coverage; what a vehicle gets when it is allowed to use the pair
    /// anyway (the current-network fallback).
    pub fn raw_rate(&self, bandwidth_demand: f64, efficiency: f64) -> f64 {
        data_rate(bandwidth_demand, self.sinr_db, efficiency)
    }
}

/// Computes the full channel state of pair `(i, j)` at `epoch` with the
/// frozen shadowing draw.
pub fn link_state(s: &Scenario, network: usize, vehicle: usize, epoch: u64) -> Result<LinkState> {
    let n = s.networks.get(network).ok_or(Error::UnknownNetwork(network))?;
    let v = s.vehicle(vehicle)?;
    let r = &s.radio;
    let shadow = shadowing_db(s.rng_seed, network, vehicle, epoch, r.shadowing_sigma_db);
    let p = received_power_dbm(n, v, r, shadow);
    let sinr = sinr_db(p, r.noise_floor_dbm);
    let alignment = direction_alignment(v, n).unwrap_or(0.0);
    let (angle_deg, heading_defined) = match heading_angle_deg(v, n) {
        Ok(a) => (a, true),
        Err(_) => (0.0, false),
    };
    let angle_ok = !heading_defined || angle_deg <= r.angle_threshold_deg;
    let in_coverage = p >= r.power_threshold_dbm && sinr >= r.sinr_threshold_db && angle_ok;
    let rate = if in_coverage {
        data_rate(v.bandwidth_demand, sinr, r.shannon_efficiency)
    } else {
        0.0
    };
    Ok(LinkState {
        network,
        vehicle,
        received_power_dbm: p,
        sinr_db: sinr,
        rate,
        alignment,
        angle_deg,
        heading_defined,
        in_coverage,
    })
}

/// Channel states of every (network, vehicle) pair at one epoch.
#[derive(Debug, Clone)]
pub struct LinkTable {
    n_networks: usize,
    n_vehicles: usize,
    links: Vec<LinkState>,
}

impl LinkTable {
    pub fn build(s: &Scenario, epoch: u64) -> Result<LinkTable> {
        let n_networks = s.network_count();
        let n_vehicles = s.vehicle_count();
        let mut links = Vec::with_capacity(n_networks * n_vehicles);
        for i in 0..n_networks {
            for j in 1..=n_vehicles {
                links.push(link_state(s, i, j, epoch)?);
            }
        }
        Ok(LinkTable { n_networks, n_vehicles, links })
    }

    /// Link of network `i` and vehicle id `j`.
    pub fn get(&self, network: usize, vehicle: usize) -> &LinkState {
        &self.links[network * self.n_vehicles + (vehicle - 1)]
    }

    pub fn n_networks(&self) -> usize {
        self.n_networks
    }

    pub fn n_vehicles(&self) -> usize {
        self.n_vehicles
    }

    pub fn iter(&self) -> impl Iterator<Item = &LinkState> {
        self.links.iter()
    }

    /// FNV-1a hash over every link field, in pair order. Used to certify
    /// that two solver runs consumed identical channel draws.
    pub fn digest(&self) -> u64 {
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        let mut eat = |bits: u64| {
            for byte in bits.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        };
        for l in &self.links {
            eat(l.network as u64);
            eat(l.vehicle as u64);
            eat(l.received_power_dbm.to_bits());
            eat(l.sinr_db.to_bits());
            eat(l.rate.to_bits());
            eat(l.alignment.to_bits());
            eat(l.angle_deg.to_bits());
            eat(u64::from(l.heading_defined));
            eat(u64::from(l.in_coverage));
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AppClass, HandoverModel, RatClass};

    fn flat_radio() -> RadioParams {
        RadioParams { shadowing_sigma_db: 0.0, ..RadioParams::default() }
    }

    fn network_at(id: usize, pos: [f64; 2], tx_dbm: f64) -> NetworkNode {
        NetworkNode {
            id,
            rat: if id == 0 { RatClass::AdhocCurrent } else { RatClass::Nr5g },
            position: pos,
            bandwidth_total: 100e6,
            compute_total: 2e9,
            base_latency: 0.005,
            idle_power: 10.0,
            compute_power: 30.0,
            stable_tx_power: 30.0,
            compute_service_time: 0.001,
            idle_window_s: 0.01,
            tx_power_dbm: tx_dbm,
        }
    }

    fn vehicle_at(id: usize, pos: [f64; 2], vel: [f64; 2], dest: [f64; 2]) -> VehicleAgent {
        VehicleAgent {
            id,
            position: pos,
            velocity: vel,
            destination: dest,
            app: AppClass::Safety,
            data_size: 1e4,
            compute_demand: 1e6,
            bandwidth_demand: 1e6,
            compute_grant_demand: 0.2e9,
            current_network: 0,
        }
    }

    fn scenario_one_pair(net_pos: [f64; 2]) -> Scenario {
        Scenario {
            networks: vec![network_at(0, net_pos, 30.0)],
            vehicles: vec![vehicle_at(1, [0.0, 0.0], [1.0, 0.0], [100.0, 0.0])],
            radio: flat_radio(),
            handover: HandoverModel::default(),
            lambda: 0.1,
            rng_seed: 42,
            epoch: 0,
        }
    }

    #[test]
    fn path_loss_without_shadowing_is_analytic() {
        let r = flat_radio();
        // 40 + 10 * 2.7 * log10(100) = 40 + 54 exactly.
        assert_eq!(path_loss_db(&r, 100.0), 94.0);
        let n = network_at(0, [100.0, 0.0], 30.0);
        let v = vehicle_at(1, [0.0, 0.0], [1.0, 0.0], [50.0, 0.0]);
        assert_eq!(received_power_dbm(&n, &v, &r, 0.0), -64.0);
    }

    #[test]
    fn path_loss_clamps_below_reference_distance() {
        let r = flat_radio();
        assert_eq!(path_loss_db(&r, 0.0), path_loss_db(&r, r.reference_distance));
        assert_eq!(path_loss_db(&r, 0.5), r.reference_loss_db);
    }

    #[test]
    fn received_power_decreases_with_distance() {
        let r = flat_radio();
        let v = vehicle_at(1, [0.0, 0.0], [1.0, 0.0], [50.0, 0.0]);
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 10.0, 50.0, 200.0, 1000.0] {
            let n = network_at(0, [d, 0.0], 30.0);
            let p = received_power_dbm(&n, &v, &r, 0.0);
            assert!(p < last, "power must fall with distance (d = {d})");
            last = p;
        }
    }

    #[test]
    fn shadowing_is_frozen_per_tuple_and_zero_at_zero_sigma() {
        let a = shadowing_db(7, 1, 2, 3, 4.0);
        assert_eq!(a, shadowing_db(7, 1, 2, 3, 4.0));
        assert_ne!(a, shadowing_db(7, 1, 2, 4, 4.0));
        assert_ne!(a, shadowing_db(7, 2, 1, 3, 4.0));
        assert_eq!(shadowing_db(7, 1, 2, 3, 0.0), 0.0);
    }

    #[test]
    fn shannon_rate_matches_frozen_oracle_values() {
        // Independently computed with a 30-digit evaluation of
        // b * log2(1 + 10^(sinr/10)).
        let r = data_rate(20e6, 15.0, 1.0);
        assert!((r - 100_556_153.467_010_38).abs() / 100_556_153.467 < 1e-12, "got {r}");
        assert_eq!(data_rate(1e6, 0.0, 1.0), 1e6);
        assert_eq!(data_rate(20e6, 15.0, 0.5), 0.5 * r);
    }

    #[test]
    fn shannon_rate_is_monotone_and_positive() {
        let mut last = 0.0;
        for sinr in [-20.0, -5.0, 0.0, 10.0, 25.0, 40.0] {
            let r = data_rate(5e6, sinr, 1.0);
            assert!(r > last);
            last = r;
        }
        assert!(data_rate(5e6, -40.0, 1.0) > 0.0);
        assert!(data_rate(10e6, 10.0, 1.0) > data_rate(5e6, 10.0, 1.0));
    }

    #[test]
    fn alignment_matches_geometry() {
        let v = vehicle_at(1, [0.0, 0.0], [1.0, 0.0], [100.0, 0.0]);
        let ahead = network_at(0, [50.0, 0.0], 30.0);
        let side = network_at(0, [0.0, 50.0], 30.0);
        let diag = network_at(0, [50.0, 50.0], 30.0);
        assert_eq!(direction_alignment(&v, &ahead).unwrap(), 1.0);
        assert_eq!(direction_alignment(&v, &side).unwrap(), 0.0);
        let d = direction_alignment(&v, &diag).unwrap();
        assert!((d - 0.707_106_781_186_547_6).abs() < 1e-15);
    }

    #[test]
    fn degenerate_geometry_is_signalled() {
        let parked = vehicle_at(1, [5.0, 5.0], [0.0, 0.0], [5.0, 5.0]);
        let n = network_at(0, [50.0, 0.0], 30.0);
        assert!(matches!(
            direction_alignment(&parked, &n),
            Err(Error::DirectionUndefined { vehicle: 1, .. })
        ));
        assert!(matches!(
            heading_angle_deg(&parked, &n),
            Err(Error::DirectionUndefined { vehicle: 1, .. })
        ));
    }

    #[test]
    fn heading_angle_matches_geometry() {
        let v = vehicle_at(1, [0.0, 0.0], [1.0, 0.0], [100.0, 0.0]);
        let above = network_at(0, [0.0, 10.0], 30.0);
        let behind = network_at(0, [-10.0, 0.0], 30.0);
        assert!((heading_angle_deg(&v, &above).unwrap() - 90.0).abs() < 1e-12);
        assert!((heading_angle_deg(&v, &behind).unwrap() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn link_state_gates_rate_on_coverage() {
        // 30 dBm at ~316 m with n = 2.7: P ~ -77.5 dBm, SINR ~ 17.5 dB: in.
        let near = scenario_one_pair([300.0, 0.0]);
        let l = link_state(&near, 0, 1, 0).unwrap();
        assert!(l.in_coverage);
        assert!(l.rate > 0.0);
        assert_eq!(l.rate, data_rate(1e6, l.sinr_db, 1.0));

        // Same geometry but SINR below the 15 dB screen: rate must be 0.
        let mut far = scenario_one_pair([800.0, 0.0]);
        far.vehicles[0].destination = [100.0, 0.0];
        let l = link_state(&far, 0, 1, 0).unwrap();
        assert!(l.sinr_db < far.radio.sinr_threshold_db);
        assert!(!l.in_coverage);
        assert_eq!(l.rate, 0.0);
        assert!(l.raw_rate(1e6, 1.0) > 0.0);
    }

    #[test]
    fn angle_screen_applies_only_with_defined_heading() {
        let mut s = scenario_one_pair([-300.0, 0.0]);
        s.radio.angle_threshold_deg = 90.0;
        // Network sits directly behind the heading: screened out.
        let l = link_state(&s, 0, 1, 0).unwrap();
        assert!(l.heading_defined);
        assert!((l.angle_deg - 180.0).abs() < 1e-12);
        assert!(!l.in_coverage);
        // Parked vehicle: angle screen bypassed, link back in coverage.
        s.vehicles[0].velocity = [0.0, 0.0];
        let l = link_state(&s, 0, 1, 0).unwrap();
        assert!(!l.heading_defined);
        assert!(l.in_coverage);
    }

    #[test]
    fn link_table_digest_tracks_draws() {
        let mut s = scenario_one_pair([300.0, 0.0]);
        s.radio.shadowing_sigma_db = 4.0;
        let t0 = LinkTable::build(&s, 0).unwrap();
        let t0_again = LinkTable::build(&s, 0).unwrap();
        let t1 = LinkTable::build(&s, 1).unwrap();
        assert_eq!(t0.digest(), t0_again.digest());
        assert_ne!(t0.digest(), t1.digest());
        let mut reseeded = s.clone();
        reseeded.rng_seed = 43;
        assert_ne!(t0.digest(), LinkTable::build(&reseeded, 0).unwrap().digest());
    }
}
