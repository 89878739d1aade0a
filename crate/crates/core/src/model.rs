//! Domain types shared by every layer: networks, vehicles, radio and
//! handover configuration, the assignment matrix, and solver reports.
//!
//! Conventions used throughout the crate:
//! * index `i` ranges over networks `0..=N`, where `networks[0]` is the
//!   currently attached ad hoc network and `1..=N` are candidates;
//! * index `j` ranges over vehicles; vehicle ids are `1..=V` and map to
//!   `vehicles[j - 1]`;
//! * SI units everywhere: seconds, Hz, bits, cycles, metres, watts; radio
//!   levels in dB / dBm where the field name says so.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Radio access technology of a network node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatClass {
    Lte4g,
    Nr5g,
    Dsrc,
    /// The network the vehicle fleet is currently attached to. Exactly one
    /// node (index 0) carries this class; it is the always-available
    /// fallback with zero handover cost for vehicles that stay on it.
    AdhocCurrent,
}

/// Application class of a vehicle. Safety traffic outranks infotainment
/// wherever the two compete for capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppClass {
    Safety,
    Infotainment,
}

impl AppClass {
    /// Target end-to-end latency for the class; reported as a violation
    /// metric, never enforced as a hard constraint.
    pub fn latency_budget(self) -> f64 {
        match self {
            AppClass::Safety => 0.050,
            AppClass::Infotainment => 0.100,
        }
    }
}

/// One network node (base station, RSU, or the current ad hoc attachment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkNode {
    /// Network id `i`; must equal the node's index in `Scenario::networks`.
    pub id: usize,
    pub rat: RatClass,
    /// Position in metres.
    pub position: [f64; 2],
    /// Total bandwidth budget `B_i` in Hz.
    pub bandwidth_total: f64,
    /// Total compute budget `F_i^max` in cycles/s.
    pub compute_total: f64,
    /// Fixed network latency offset in seconds.
    pub base_latency: f64,
    /// Idle power draw in watts.
    pub idle_power: f64,
    /// Compute power draw in watts.
    pub compute_power: f64,
    /// Stable transmission power in watts (denominator of the
    /// power-induced delay term).
    pub stable_tx_power: f64,
    /// Compute service time in seconds.
    pub compute_service_time: f64,
    /// Idle window length in seconds charged at `idle_power`.
    #[serde(default = "default_idle_window")]
    pub idle_window_s: f64,
    /// Transmit power in dBm used by the path loss model.
    pub tx_power_dbm: f64,
}

fn default_idle_window() -> f64 {
    0.01
}

/// One vehicle and its application demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleAgent {
    /// Vehicle id `j` in `1..=V`; must equal index + 1 in
    /// `Scenario::vehicles`.
    pub id: usize,
    /// Position in metres.
    pub position: [f64; 2],
    /// Velocity in m/s; the heading used by the direction screen.
    pub velocity: [f64; 2],
    /// Destination waypoint in metres.
    pub destination: [f64; 2],
    pub app: AppClass,
    /// Message size `s_j` in bits.
    pub data_size: f64,
    /// Offloaded computation demand `c_j` in cycles.
    pub compute_demand: f64,
    /// Bandwidth grant demanded when assigned, `b_ij`, in Hz.
    pub bandwidth_demand: f64,
    /// Compute grant demanded when assigned, `f_ij`, in cycles/s.
    pub compute_grant_demand: f64,
    /// Id of the network the vehicle is attached to before this decision
    /// epoch; staying on it costs no handover and is always permitted.
    pub current_network: usize,
}

/// Log-distance path loss and screening thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    /// Path loss exponent `n`.
    pub pathloss_exponent: f64,
    /// Reference distance `d0` in metres.
    pub reference_distance: f64,
    /// Path loss at the reference distance in dB.
    pub reference_loss_db: f64,
    /// Log-normal shadowing standard deviation in dB; 0 disables shadowing.
    pub shadowing_sigma_db: f64,
    /// Noise floor in dBm.
    pub noise_floor_dbm: f64,
    /// Minimum SINR for a candidate link, in dB.
    pub sinr_threshold_db: f64,
    /// Minimum received power for a candidate link, in dBm.
    pub power_threshold_dbm: f64,
    /// Maximum angle between vehicle heading and network direction, in
    /// degrees. The default of 180 makes the screen vacuous.
    pub angle_threshold_deg: f64,
    /// Spectral efficiency factor applied to the Shannon rate, in (0, 1].
    pub shannon_efficiency: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            pathloss_exponent: 2.7,
            reference_distance: 1.0,
            reference_loss_db: 40.0,
            shadowing_sigma_db: 4.0,
            noise_floor_dbm: -95.0,
            sinr_threshold_db: 15.0,
            power_threshold_dbm: -90.0,
            angle_threshold_deg: 180.0,
            shannon_efficiency: 1.0,
        }
    }
}

/// How the per-decision handover delay is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverMode {
    /// Draw one truncated normal sample per (vehicle, candidate, epoch);
    /// the draw is frozen by the scenario seed, so repeated evaluation is
    /// deterministic.
    #[serde(rename = "sampled")]
    SampledPerDecision,
    /// Charge the mean; used wherever a deterministic constant is needed.
    #[serde(rename = "expected")]
    ExpectedValue,
}

/// Truncated-normal handover delay model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandoverModel {
    /// Mean handover delay in seconds.
    pub mean_s: f64,
    /// Standard deviation in seconds.
    pub std_s: f64,
    pub mode: HandoverMode,
}

impl Default for HandoverModel {
    fn default() -> Self {
        HandoverModel {
            mean_s: 0.020,
            std_s: 0.005,
            mode: HandoverMode::ExpectedValue,
        }
    }
}

/// A complete decision-epoch snapshot: topology, fleet, channel
/// configuration, and the seed that freezes every stochastic draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub networks: Vec<NetworkNode>,
    pub vehicles: Vec<VehicleAgent>,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub handover: HandoverModel,
    /// Direction-alignment weight in the heuristic scores.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Seed for shadowing, handover, and mobility draws.
    pub rng_seed: u64,
    /// Decision epoch counter; advanced by `scenario::step`.
    #[serde(default)]
    pub epoch: u64,
}

fn default_lambda() -> f64 {
    0.1
}

impl Scenario {
    /// Number of candidate networks `N` (excluding the current network at
    /// index 0).
    pub fn candidate_count(&self) -> usize {
        self.networks.len().saturating_sub(1)
    }

    pub fn network_count(&self) -> usize {
        self.networks.len()
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Vehicle with id `j` (ids are 1-based).
    pub fn vehicle(&self, id: usize) -> Result<&VehicleAgent> {
        self.vehicles.get(id.wrapping_sub(1)).ok_or(Error::UnknownVehicle(id))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| Error::ScenarioParse(e.to_string()))
    }
}

/// Validates every structural invariant of a scenario. Returns one message
/// per violation naming the entity and field; an empty list means valid.
pub fn validate_scenario(s: &Scenario) -> Vec<String> {
    let mut errs = Vec::new();
    if s.networks.is_empty() {
        errs.push("networks: empty; index 0 must hold the current network".into());
        return errs;
    }
    for (idx, n) in s.networks.iter().enumerate() {
        let tag = format!("networks[{idx}]");
        if n.id != idx {
            errs.push(format!("{tag}.id: {} does not equal its index {idx}", n.id));
        }
        if idx == 0 && n.rat != RatClass::AdhocCurrent {
            errs.push(format!("{tag}.rat: index 0 must be adhoc_current"));
        }
        if idx > 0 && n.rat == RatClass::AdhocCurrent {
            errs.push(format!("{tag}.rat: adhoc_current is reserved for index 0"));
        }
        if !(n.bandwidth_total > 0.0) {
            errs.push(format!("{tag}.bandwidth_total: must be > 0, got {}", n.bandwidth_total));
        }
        if !(n.compute_total > 0.0) {
            errs.push(format!("{tag}.compute_total: must be > 0, got {}", n.compute_total));
        }
        if !(n.base_latency >= 0.0) {
            errs.push(format!("{tag}.base_latency: must be >= 0, got {}", n.base_latency));
        }
        if !(n.idle_power >= 0.0) {
            errs.push(format!("{tag}.idle_power: must be >= 0, got {}", n.idle_power));
        }
        if !(n.compute_power >= 0.0) {
            errs.push(format!("{tag}.compute_power: must be >= 0, got {}", n.compute_power));
        }
        if !(n.stable_tx_power > 0.0) {
            errs.push(format!("{tag}.stable_tx_power: must be > 0, got {}", n.stable_tx_power));
        }
        if !(n.compute_service_time >= 0.0) {
            errs.push(format!("{tag}.compute_service_time: must be >= 0, got {}", n.compute_service_time));
        }
        if !(n.idle_window_s >= 0.0) {
            errs.push(format!("{tag}.idle_window_s: must be >= 0, got {}", n.idle_window_s));
        }
        if !n.position.iter().all(|c| c.is_finite()) {
            errs.push(format!("{tag}.position: must be finite"));
        }
        if !n.tx_power_dbm.is_finite() {
            errs.push(format!("{tag}.tx_power_dbm: must be finite"));
        }
    }
    for (idx, v) in s.vehicles.iter().enumerate() {
        let tag = format!("vehicles[{idx}]");
        if v.id != idx + 1 {
            errs.push(format!("{tag}.id: {} does not equal index + 1 = {}", v.id, idx + 1));
        }
        if !(v.data_size > 0.0) {
            errs.push(format!("{tag}.data_size: must be > 0, got {}", v.data_size));
        }
        if !(v.compute_demand >= 0.0) {
            errs.push(format!("{tag}.compute_demand: must be >= 0, got {}", v.compute_demand));
        }
        if !(v.bandwidth_demand > 0.0) {
            errs.push(format!("{tag}.bandwidth_demand: must be > 0, got {}", v.bandwidth_demand));
        }
        if v.compute_demand > 0.0 && !(v.compute_grant_demand > 0.0) {
            errs.push(format!(
                "{tag}.compute_grant_demand: must be > 0 when compute_demand > 0, got {}",
                v.compute_grant_demand
            ));
        }
        if !(v.compute_grant_demand >= 0.0) {
            errs.push(format!("{tag}.compute_grant_demand: must be >= 0, got {}", v.compute_grant_demand));
        }
        if v.current_network >= s.networks.len() {
            errs.push(format!("{tag}.current_network: {} is not a network id", v.current_network));
        }
        let moving = vec2::norm(v.velocity) > 0.0;
        if moving && v.destination == v.position {
            errs.push(format!("{tag}.destination: must differ from position while moving"));
        }
        for (field, val) in [("position", v.position), ("velocity", v.velocity), ("destination", v.destination)] {
            if !val.iter().all(|c| c.is_finite()) {
                errs.push(format!("{tag}.{field}: must be finite"));
            }
        }
    }
    let r = &s.radio;
    if !(r.pathloss_exponent > 0.0) {
        errs.push(format!("radio.pathloss_exponent: must be > 0, got {}", r.pathloss_exponent));
    }
    if !(r.reference_distance > 0.0) {
        errs.push(format!("radio.reference_distance: must be > 0, got {}", r.reference_distance));
    }
    if !(r.shadowing_sigma_db >= 0.0) {
        errs.push(format!("radio.shadowing_sigma_db: must be >= 0, got {}", r.shadowing_sigma_db));
    }
    if !(r.shannon_efficiency > 0.0 && r.shannon_efficiency <= 1.0) {
        errs.push(format!("radio.shannon_efficiency: must be in (0, 1], got {}", r.shannon_efficiency));
    }
    if !(r.angle_threshold_deg >= 0.0 && r.angle_threshold_deg <= 180.0) {
        errs.push(format!("radio.angle_threshold_deg: must be in [0, 180], got {}", r.angle_threshold_deg));
    }
    for (name, val) in [
        ("reference_loss_db", r.reference_loss_db),
        ("noise_floor_dbm", r.noise_floor_dbm),
        ("sinr_threshold_db", r.sinr_threshold_db),
        ("power_threshold_dbm", r.power_threshold_dbm),
    ] {
        if !val.is_finite() {
            errs.push(format!("radio.{name}: must be finite"));
        }
    }
    if !(s.handover.mean_s >= 0.0) {
        errs.push(format!("handover.mean_s: must be >= 0, got {}", s.handover.mean_s));
    }
    if !(s.handover.std_s >= 0.0) {
        errs.push(format!("handover.std_s: must be >= 0, got {}", s.handover.std_s));
    }
    if !s.lambda.is_finite() {
        errs.push(format!("lambda: must be finite, got {}", s.lambda));
    }
    errs
}

/// Validates and wraps violations into an error.
pub fn check_scenario(s: &Scenario) -> Result<()> {
    let errs = validate_scenario(s);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(errs))
    }
}

/// Binary assignment `alpha[(N+1) x V]` plus the bandwidth and compute
/// grants backing it. Stored column-compressed (one optional network and
/// grant pair per vehicle), which enforces the column-sum <= 1 invariant
/// by construction; `b` and `f` are zero wherever `alpha` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    n_networks: usize,
    /// `choice[j - 1]` is the network vehicle `j` is assigned to.
    choices: Vec<Option<usize>>,
    bandwidth_grants: Vec<f64>,
    compute_grants: Vec<f64>,
}

impl AssignmentMatrix {
    /// All-unassigned matrix with `n_networks` rows (including row 0) and
    /// one column per vehicle.
    pub fn empty(n_networks: usize, n_vehicles: usize) -> Self {
        AssignmentMatrix {
            n_networks,
            choices: vec![None; n_vehicles],
            bandwidth_grants: vec![0.0; n_vehicles],
            compute_grants: vec![0.0; n_vehicles],
        }
    }

    /// Builds a matrix from one network choice per vehicle, granting each
    /// assigned vehicle its demanded bandwidth and compute.
    pub fn from_choices(s: &Scenario, choices: &[Option<usize>]) -> Result<Self> {
        let mut m = AssignmentMatrix::empty(s.network_count(), s.vehicle_count());
        for (idx, choice) in choices.iter().enumerate() {
            if let Some(i) = choice {
                let v = &s.vehicles[idx];
                m.assign(idx + 1, *i, v.bandwidth_demand, v.compute_grant_demand)?;
            }
        }
        Ok(m)
    }

    pub fn n_networks(&self) -> usize {
        self.n_networks
    }

    pub fn n_vehicles(&self) -> usize {
        self.choices.len()
    }

    /// `alpha_ij`: is vehicle `j` assigned to network `i`?
    pub fn alpha(&self, network: usize, vehicle: usize) -> bool {
        self.choices.get(vehicle.wrapping_sub(1)).copied().flatten() == Some(network)
    }

    /// Network vehicle `j` is assigned to, if any.
    pub fn assignment_of(&self, vehicle: usize) -> Option<usize> {
        self.choices.get(vehicle.wrapping_sub(1)).copied().flatten()
    }

    /// All per-vehicle choices, indexed by vehicle id minus one.
    pub fn choices(&self) -> &[Option<usize>] {
        &self.choices
    }

    /// Bandwidth grant `b_ij` in Hz; zero wherever `alpha` is zero.
    pub fn bandwidth_grant(&self, network: usize, vehicle: usize) -> f64 {
        if self.alpha(network, vehicle) {
            self.bandwidth_grants[vehicle - 1]
        } else {
            0.0
        }
    }

    /// Compute grant `f_ij` in cycles/s; zero wherever `alpha` is zero.
    pub fn compute_grant(&self, network: usize, vehicle: usize) -> f64 {
        if self.alpha(network, vehicle) {
            self.compute_grants[vehicle - 1]
        } else {
            0.0
        }
    }

    /// Assigns vehicle `j` to network `i`, replacing any previous
    /// assignment of `j`.
    pub fn assign(&mut self, vehicle: usize, network: usize, bandwidth: f64, compute: f64) -> Result<()> {
        if network >= self.n_networks {
            return Err(Error::UnknownNetwork(network));
        }
        let idx = vehicle
            .checked_sub(1)
            .filter(|&k| k < self.choices.len())
            .ok_or(Error::UnknownVehicle(vehicle))?;
        self.choices[idx] = Some(network);
        self.bandwidth_grants[idx] = bandwidth;
        self.compute_grants[idx] = compute;
        Ok(())
    }

    pub fn clear(&mut self, vehicle: usize) {
        if let Some(idx) = vehicle.checked_sub(1).filter(|&k| k < self.choices.len()) {
            self.choices[idx] = None;
            self.bandwidth_grants[idx] = 0.0;
            self.compute_grants[idx] = 0.0;
        }
    }

    /// Vehicle ids with no assignment.
    pub fn unassigned(&self) -> Vec<usize> {
        self.choices
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(idx, _)| idx + 1)
            .collect()
    }

    /// Total granted bandwidth and compute per network, indexed by id.
    pub fn loads(&self) -> (Vec<f64>, Vec<f64>) {
        let mut bw = vec![0.0; self.n_networks];
        let mut cp = vec![0.0; self.n_networks];
        for (idx, choice) in self.choices.iter().enumerate() {
            if let Some(i) = choice {
                bw[*i] += self.bandwidth_grants[idx];
                cp[*i] += self.compute_grants[idx];
            }
        }
        (bw, cp)
    }

    /// Number of assigned vehicles per network, indexed by id.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_networks];
        for choice in self.choices.iter().flatten() {
            counts[*choice] += 1;
        }
        counts
    }

    /// The dense `(N+1) x V` alpha matrix, row i = network, column j - 1.
    pub fn to_dense(&self) -> Vec<Vec<bool>> {
        let mut dense = vec![vec![false; self.choices.len()]; self.n_networks];
        for (idx, choice) in self.choices.iter().enumerate() {
            if let Some(i) = choice {
                dense[*i][idx] = true;
            }
        }
        dense
    }
}

/// Outcome of one solver run on one decision epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub assignment: AssignmentMatrix,
    /// Realized dissemination delay per vehicle, `None` for unassigned.
    pub per_vehicle_delay: Vec<Option<f64>>,
    /// Sum of per-vehicle delays in seconds.
    pub total_delay: f64,
    /// Sum of per-vehicle utilities.
    pub total_utility: f64,
    /// `total_delay` divided by the number of assigned vehicles.
    pub mean_latency: f64,
    /// Wall-clock decision time in seconds (excludes channel simulation;
    /// for Q-learning, excludes training).
    pub solver_runtime: f64,
    /// Branch-and-bound only: nodes expanded during the search.
    pub nodes_explored: Option<u64>,
    /// Q-learning only: training episodes behind the reported policy.
    pub episodes: Option<u64>,
    /// Q-learning only: wall-clock training time in seconds.
    pub train_runtime: Option<f64>,
    /// Did the returned assignment pass `assignment_valid`?
    pub feasible: bool,
    pub unassigned_vehicles: Vec<usize>,
    /// Branch-and-bound only: false when the node limit cut the search.
    pub optimal: Option<bool>,
    /// Objective value the solver planned for, when planning and realized
    /// evaluation can differ (deterministic-cost planning under sampled
    /// handover evaluation).
    pub planned_objective: Option<f64>,
    /// Vehicle ids whose realized delay exceeds their class budget.
    pub budget_violations: Vec<usize>,
    /// Hash over the frozen channel and handover draws the run consumed;
    /// equal digests across solvers certify a fair comparison.
    pub draw_digest: u64,
}

/// Small fixed-size vector helpers for positions and velocities.
pub mod vec2 {
    pub fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        [a[0] - b[0], a[1] - b[1]]
    }

    pub fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        [a[0] + b[0], a[1] + b[1]]
    }

    pub fn scale(a: [f64; 2], k: f64) -> [f64; 2] {
        [a[0] * k, a[1] * k]
    }

    pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    pub fn norm(a: [f64; 2]) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        norm(sub(a, b))
    }

    /// Angle between two vectors in degrees, in [0, 180].
    pub fn angle_deg(a: [f64; 2], b: [f64; 2]) -> f64 {
        let denom = norm(a) * norm(b);
        if denom == 0.0 {
            return 0.0;
        }
        let cos = (dot(a, b) / denom).clamp(-1.0, 1.0);
        cos.acos().to_degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_scenario() -> Scenario {
        let networks = vec![
            NetworkNode {
                id: 0,
                rat: RatClass::AdhocCurrent,
                position: [0.0, 0.0],
                bandwidth_total: 20e6,
                compute_total: 2e9,
                base_latency: 0.040,
                idle_power: 10.0,
                compute_power: 30.0,
                stable_tx_power: 30.0,
                compute_service_time: 0.001,
                idle_window_s: 0.01,
                tx_power_dbm: 23.0,
            },
            NetworkNode {
                id: 1,
                rat: RatClass::Nr5g,
                position: [100.0, 0.0],
                bandwidth_total: 100e6,
                compute_total: 2e9,
                base_latency: 0.005,
                idle_power: 10.0,
                compute_power: 30.0,
                stable_tx_power: 30.0,
                compute_service_time: 0.001,
                idle_window_s: 0.01,
                tx_power_dbm: 43.0,
            },
        ];
        let vehicles = vec![VehicleAgent {
            id: 1,
            position: [50.0, 10.0],
            velocity: [10.0, 0.0],
            destination: [200.0, 10.0],
            app: AppClass::Safety,
            data_size: 1e4,
            compute_demand: 1e6,
            bandwidth_demand: 1e6,
            compute_grant_demand: 0.2e9,
            current_network: 0,
        }];
        Scenario {
            networks,
            vehicles,
            radio: RadioParams::default(),
            handover: HandoverModel::default(),
            lambda: 0.1,
            rng_seed: 7,
            epoch: 0,
        }
    }

    #[test]
    fn latency_budgets_by_class() {
        assert_eq!(AppClass::Safety.latency_budget(), 0.050);
        assert_eq!(AppClass::Infotainment.latency_budget(), 0.100);
        assert!(AppClass::Safety.latency_budget() < AppClass::Infotainment.latency_budget());
    }

    #[test]
    fn valid_scenario_has_no_violations() {
        assert_eq!(validate_scenario(&tiny_scenario()), Vec::<String>::new());
    }

    #[test]
    fn validation_names_entity_and_field() {
        let mut s = tiny_scenario();
        s.vehicles[0].bandwidth_demand = 0.0;
        s.networks[1].bandwidth_total = -1.0;
        let errs = validate_scenario(&s);
        assert!(errs.iter().any(|e| e.contains("vehicles[0].bandwidth_demand")));
        assert!(errs.iter().any(|e| e.contains("networks[1].bandwidth_total")));
    }

    #[test]
    fn validation_rejects_misplaced_adhoc_class() {
        let mut s = tiny_scenario();
        s.networks[0].rat = RatClass::Dsrc;
        s.networks[1].rat = RatClass::AdhocCurrent;
        let errs = validate_scenario(&s);
        assert!(errs.iter().any(|e| e.contains("networks[0].rat")));
        assert!(errs.iter().any(|e| e.contains("networks[1].rat")));
    }

    #[test]
    fn validation_rejects_moving_vehicle_at_destination() {
        let mut s = tiny_scenario();
        s.vehicles[0].destination = s.vehicles[0].position;
        let errs = validate_scenario(&s);
        assert!(errs.iter().any(|e| e.contains("vehicles[0].destination")));
        s.vehicles[0].velocity = [0.0, 0.0];
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn toml_round_trip_is_identity() {
        let s = tiny_scenario();
        let text = s.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn toml_defaults_fill_missing_tables() {
        let s = tiny_scenario();
        let mut doc: toml::Table = toml::from_str(&s.to_toml().unwrap()).unwrap();
        doc.remove("radio");
        doc.remove("handover");
        doc.remove("lambda");
        doc.remove("epoch");
        let back = Scenario::from_toml(&toml::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back.radio, RadioParams::default());
        assert_eq!(back.handover, HandoverModel::default());
        assert_eq!(back.lambda, 0.1);
        assert_eq!(back.epoch, 0);
    }

    #[test]
    fn toml_rejects_unknown_fields() {
        let s = tiny_scenario();
        let text = format!("{}\nbogus_field = 1\n", s.to_toml().unwrap());
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn assignment_matrix_constraints_hold() {
        let s = tiny_scenario();
        let mut m = AssignmentMatrix::empty(s.network_count(), s.vehicle_count());
        assert_eq!(m.unassigned(), vec![1]);
        m.assign(1, 1, 1e6, 2e8).unwrap();
        assert!(m.alpha(1, 1));
        assert!(!m.alpha(0, 1));
        assert_eq!(m.bandwidth_grant(0, 1), 0.0);
        assert_eq!(m.bandwidth_grant(1, 1), 1e6);
        // Reassignment moves the column, never duplicates it.
        m.assign(1, 0, 1e6, 2e8).unwrap();
        assert_eq!(m.assignment_of(1), Some(0));
        let dense = m.to_dense();
        let col_sum: usize = dense.iter().map(|row| row[0] as usize).sum();
        assert_eq!(col_sum, 1);
        assert!(m.assign(1, 9, 1e6, 2e8).is_err());
        assert!(m.assign(5, 0, 1e6, 2e8).is_err());
    }

    #[test]
    fn assignment_loads_sum_grants() {
        let s = tiny_scenario();
        let m = AssignmentMatrix::from_choices(&s, &[Some(1)]).unwrap();
        let (bw, cp) = m.loads();
        assert_eq!(bw, vec![0.0, 1e6]);
        assert_eq!(cp, vec![0.0, 0.2e9]);
        assert_eq!(m.counts(), vec![0, 1]);
    }

    #[test]
    fn angle_between_vectors() {
        assert!((vec2::angle_deg([1.0, 0.0], [0.0, 1.0]) - 90.0).abs() < 1e-12);
        assert!((vec2::angle_deg([1.0, 0.0], [-1.0, 0.0]) - 180.0).abs() < 1e-12);
        assert_eq!(vec2::angle_deg([1.0, 0.0], [1.0, 0.0]), 0.0);
    }
}
