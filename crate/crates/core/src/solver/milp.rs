//! Exact assignment solver: depth-first branch-and-bound over a
//! deterministic pair-cost matrix, plus a brute-force enumeration oracle
//! used to certify it.
//!
//! Costs are planned with the handover charged at its expected value, so
//! the matrix is a table of constants; realized totals in the report use
//! the scenario's own handover mode like every other solver.
//!
//! Search design:
//! * branch on the undecided vehicle with the largest regret (gap between
//!   its best and second-best pair cost) first;
//! * children visited in ascending pair cost, so the first dive is greedy
//!   and produces an incumbent after `V` nodes;
//! * lower bound of a node = cost of fixed vehicles + sum over undecided
//!   vehicles of their capacity-ignoring minimum pair cost (admissible:
//!   it never exceeds the cost of any completion);
//! * a node is pruned only when its bound strictly exceeds the incumbent,
//!   so every equal-cost optimum stays reachable and ties resolve to the
//!   lexicographically smallest (vehicle, network) assignment;
//! * complete solutions are re-summed in ascending vehicle order before
//!   comparison, so equal assignments produce bit-equal objectives no
//!   matter what path found them.

use std::time::Instant;

use crate::model::{AssignmentMatrix, SolveReport};
use crate::solver::{finish_report, EpochContext};
use crate::{Error, Result};

/// Deterministic planning cost of every feasible pair; `None` marks pairs
/// the mask rejects (they can never be assigned).
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n_networks: usize,
    n_vehicles: usize,
    costs: Vec<Option<f64>>,
}

impl CostMatrix {
    pub fn get(&self, network: usize, vehicle: usize) -> Option<f64> {
        self.costs[network * self.n_vehicles + (vehicle - 1)]
    }

    pub fn n_networks(&self) -> usize {
        self.n_networks
    }

    pub fn n_vehicles(&self) -> usize {
        self.n_vehicles
    }

    /// Sum of pair costs of a full assignment in ascending vehicle order
    /// (the canonical order used for all objective comparisons).
    pub fn assignment_cost(&self, choices: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        for (idx, &i) in choices.iter().enumerate() {
            total += self.get(i, idx + 1)?;
        }
        Some(total)
    }
}

/// Builds the planning cost matrix for the epoch. Every mask-allowed pair
/// has a finite cost; the vehicle's fallback network is always among them.
pub fn build_cost_matrix(ctx: &EpochContext) -> Result<CostMatrix> {
    let n_networks = ctx.n_networks();
    let n_vehicles = ctx.n_vehicles();
    let mut costs = vec![None; n_networks * n_vehicles];
    for i in 0..n_networks {
        for j in 1..=n_vehicles {
            if ctx.mask.allowed(i, j) {
                costs[i * n_vehicles + (j - 1)] = Some(ctx.planned_cost(i, j)?);
            }
        }
    }
    Ok(CostMatrix { n_networks, n_vehicles, costs })
}

/// Branch-and-bound search limits.
#[derive(Debug, Clone)]
pub struct BnbConfig {
    /// Stop expanding after this many nodes and return the best incumbent
    /// with the `optimal` flag cleared.
    pub node_limit: u64,
    /// Disable only to measure how much work the bound saves; the
    /// returned assignment must not change.
    pub prune: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig { node_limit: 2_000_000, prune: true }
    }
}

struct SearchState<'m, 's> {
    costs: &'m CostMatrix,
    /// Vehicle ids in branching order.
    order: Vec<usize>,
    /// Per order position: candidate `(cost, network)` ascending by cost.
    candidates: Vec<Vec<(f64, usize)>>,
    /// `suffix_min[k]`: sum of per-vehicle minimum costs from order
    /// position `k` to the end.
    suffix_min: Vec<f64>,
    bw_budget: Vec<f64>,
    cp_budget: Vec<f64>,
    bw_demand: &'s [f64],
    cp_demand: &'s [f64],
    config: BnbConfig,
    nodes: u64,
    limit_hit: bool,
    /// Best complete assignment: canonical cost + choices by vehicle.
    incumbent: Option<(f64, Vec<usize>)>,
    /// Choice per vehicle id - 1 along the current path.
    path: Vec<usize>,
}

impl SearchState<'_, '_> {
    fn dfs(&mut self, depth: usize, partial_cost: f64) {
        if self.nodes >= self.config.node_limit {
            self.limit_hit = true;
            return;
        }
        self.nodes += 1;
        if depth == self.order.len() {
            let cost = self
                .costs
                .assignment_cost(&self.path)
                .expect("every path pair was taken from the cost matrix");
            let better = match &self.incumbent {
                None => true,
                Some((best, choices)) => cost < *best || (cost == *best && self.path < *choices),
            };
            if better {
                self.incumbent = Some((cost, self.path.clone()));
            }
            return;
        }
        let bound = partial_cost + self.suffix_min[depth];
        if self.config.prune {
            if let Some((best, _)) = &self.incumbent {
                if bound > *best {
                    return;
                }
            }
        }
        let vehicle = self.order[depth];
        for c in 0..self.candidates[depth].len() {
            let (cost, network) = self.candidates[depth][c];
            let (bw, cp) = (self.bw_demand[vehicle - 1], self.cp_demand[vehicle - 1]);
            if self.bw_budget[network] < bw || self.cp_budget[network] < cp {
                continue;
            }
            self.bw_budget[network] -= bw;
            self.cp_budget[network] -= cp;
            self.path[vehicle - 1] = network;
            self.dfs(depth + 1, partial_cost + cost);
            self.bw_budget[network] += bw;
            self.cp_budget[network] += cp;
            if self.limit_hit {
                return;
            }
        }
    }
}

/// Exact solver. Returns the minimum-total-delay full assignment under
/// the feasibility mask and all capacity budgets; errors with
/// [`Error::NoFeasibleAssignment`] when no full assignment fits (which
/// cannot happen when every vehicle's fallback network has room for it).
pub fn solve_bnb(ctx: &EpochContext, config: &BnbConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let costs = build_cost_matrix(ctx)?;
    let n_vehicles = ctx.n_vehicles();

    let mut per_vehicle: Vec<(usize, Vec<(f64, usize)>)> = Vec::with_capacity(n_vehicles);
    for j in 1..=n_vehicles {
        let mut cands: Vec<(f64, usize)> = (0..ctx.n_networks())
            .filter_map(|i| costs.get(i, j).map(|c| (c, i)))
            .collect();
        if cands.is_empty() {
            return Err(Error::NoFeasibleAssignment);
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        per_vehicle.push((j, cands));
    }
    // Largest regret first; forced vehicles (one candidate) lead.
    per_vehicle.sort_by(|(ja, ca), (jb, cb)| {
        let regret = |c: &Vec<(f64, usize)>| {
            if c.len() < 2 {
                f64::INFINITY
            } else {
                c[1].0 - c[0].0
            }
        };
        regret(cb).total_cmp(&regret(ca)).then(ja.cmp(jb))
    });

    let order: Vec<usize> = per_vehicle.iter().map(|(j, _)| *j).collect();
    let candidates: Vec<Vec<(f64, usize)>> = per_vehicle.into_iter().map(|(_, c)| c).collect();
    let mut suffix_min = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix_min[k] = suffix_min[k + 1] + candidates[k][0].0;
    }

    let bw_demand: Vec<f64> = ctx.scenario.vehicles.iter().map(|v| v.bandwidth_demand).collect();
    let cp_demand: Vec<f64> = ctx.scenario.vehicles.iter().map(|v| v.compute_grant_demand).collect();
    let mut state = SearchState {
        costs: &costs,
        order,
        candidates,
        suffix_min,
        bw_budget: ctx.scenario.networks.iter().map(|n| n.bandwidth_total).collect(),
        cp_budget: ctx.scenario.networks.iter().map(|n| n.compute_total).collect(),
        bw_demand: &bw_demand,
        cp_demand: &cp_demand,
        config: config.clone(),
        nodes: 0,
        limit_hit: false,
        incumbent: None,
        path: vec![usize::MAX; n_vehicles],
    };
    state.dfs(0, 0.0);

    let (planned, choices) = state.incumbent.ok_or(Error::NoFeasibleAssignment)?;
    let picks: Vec<Option<usize>> = choices.iter().map(|&i| Some(i)).collect();
    let assignment = AssignmentMatrix::from_choices(ctx.scenario, &picks)?;
    let mut report = finish_report(ctx, "milp", assignment, started)?;
    report.nodes_explored = Some(state.nodes);
    report.optimal = Some(!state.limit_hit);
    report.planned_objective = Some(planned);
    Ok(report)
}

/// Exact solver with default limits.
pub fn solve_bnb_default(ctx: &EpochContext) -> Result<SolveReport> {
    solve_bnb(ctx, &BnbConfig::default())
}

/// Enumeration cap for the oracle.
pub const EXHAUSTIVE_CAP: u64 = 2_000_000;

/// Brute-force oracle: walks every one of the `(N+1)^V` full assignments
/// in lexicographic (vehicle, network) order, keeps the cheapest one that
/// passes the mask and the capacity budgets, and refuses search spaces
/// larger than `cap`. First-found minima win, which is exactly the
/// lexicographic tie-break the branch-and-bound promises.
pub fn solve_exhaustive(ctx: &EpochContext, cap: u64) -> Result<SolveReport> {
    let started = Instant::now();
    let costs = build_cost_matrix(ctx)?;
    let n_networks = ctx.n_networks();
    let n_vehicles = ctx.n_vehicles();
    let space = (n_networks as f64).powi(n_vehicles as i32);
    if space > cap as f64 {
        return Err(Error::SearchSpaceExceeded { size: space, cap: cap as f64 });
    }

    let bw_demand: Vec<f64> = ctx.scenario.vehicles.iter().map(|v| v.bandwidth_demand).collect();
    let cp_demand: Vec<f64> = ctx.scenario.vehicles.iter().map(|v| v.compute_grant_demand).collect();
    let bw_budget: Vec<f64> = ctx.scenario.networks.iter().map(|n| n.bandwidth_total).collect();
    let cp_budget: Vec<f64> = ctx.scenario.networks.iter().map(|n| n.compute_total).collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut choices = vec![0usize; n_vehicles];
    let mut bw_used = vec![0.0; n_networks];
    let mut cp_used = vec![0.0; n_networks];
    'outer: loop {
        // Validity and cost of the current assignment, from scratch.
        let mut ok = true;
        let mut cost = 0.0;
        for x in bw_used.iter_mut().chain(cp_used.iter_mut()) {
            *x = 0.0;
        }
        for j in 1..=n_vehicles {
            let i = choices[j - 1];
            match costs.get(i, j) {
                Some(c) => cost += c,
                None => {
                    ok = false;
                    break;
                }
            }
            bw_used[i] += bw_demand[j - 1];
            cp_used[i] += cp_demand[j - 1];
        }
        if ok {
            for i in 0..n_networks {
                if bw_used[i] > bw_budget[i] || cp_used[i] > cp_budget[i] {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let better = match &best {
                None => true,
                Some((b, _)) => cost < *b,
            };
            if better {
                best = Some((cost, choices.clone()));
            }
        }
        // Odometer increment, last vehicle fastest: lexicographic order.
        for j in (0..n_vehicles).rev() {
            choices[j] += 1;
            if choices[j] < n_networks {
                continue 'outer;
            }
            choices[j] = 0;
        }
        break;
    }

    let (planned, choices) = best.ok_or(Error::NoFeasibleAssignment)?;
    let picks: Vec<Option<usize>> = choices.iter().map(|&i| Some(i)).collect();
    let assignment = AssignmentMatrix::from_choices(ctx.scenario, &picks)?;
    let mut report = finish_report(ctx, "exhaustive", assignment, started)?;
    report.optimal = Some(true);
    report.planned_objective = Some(planned);
    Ok(report)
}
