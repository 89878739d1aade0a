//! Latency-aware network selection for heterogeneous vehicular networks.
//!
//! A fleet of vehicles must each pick one radio network (4G, 5G, DSRC, or
//! their current ad hoc attachment) for message dissemination and compute
//! offload. The crate models the radio channel and the dissemination delay,
//! screens infeasible links, and ships three solvers for the resulting
//! capacity-constrained assignment problem:
//!
//! * [`solver::milp`]: exact branch-and-bound over deterministic pair
//!   costs, with an exhaustive-enumeration oracle;
//! * [`solver::ans`]: a two-phase per-vehicle scoring heuristic with
//!   priority-aware eviction;
//! * [`solver::qlearn`]: per-vehicle tabular Q-learning agents.
//!
//! [`scenario`] generates seeded scenarios, advances waypoint mobility, and
//! ingests mobility traces; [`harness`] runs head-to-head comparisons and
//! parameter sweeps with every solver consuming identical frozen channel
//! draws.

pub mod delay;
pub mod feasibility;
pub mod harness;
pub mod model;
pub mod radio;
pub mod scenario;
pub(crate) mod seedmix;
pub mod solver;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),
    /// The pair's data rate is zero (out of coverage); its delay is
    /// undefined rather than infinite.
    #[error("link unusable: network {network} offers vehicle {vehicle} zero data rate")]
    LinkUnusable { network: usize, vehicle: usize },
    #[error("vehicle {vehicle} demands {demand} cycles but holds no compute grant")]
    NoComputeGrant { vehicle: usize, demand: f64 },
    /// A direction vector is degenerate (zero length); callers apply the
    /// screening bypass instead of treating this as a broken link.
    #[error("direction undefined for vehicle {vehicle}: {reason}")]
    DirectionUndefined { vehicle: usize, reason: String },
    #[error("search space of {size:e} assignments exceeds the enumeration cap {cap:e}")]
    SearchSpaceExceeded { size: f64, cap: f64 },
    #[error("no capacity-feasible full assignment exists")]
    NoFeasibleAssignment,
    #[error("unknown network id {0}")]
    UnknownNetwork(usize),
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(usize),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error("scenario parse error: {0}")]
    ScenarioParse(String),
    #[error("serialization error: {0}")]
    Serialize(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
