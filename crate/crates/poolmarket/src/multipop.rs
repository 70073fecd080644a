//! General networks with multiple populations: capacity allocation across
//! submarkets by branch-and-price, with trip columns generated on demand,
//! then a per-submarket equilibrium via the base pipeline.
//!
//! Populations partition the agents; each carries its own origin-destination
//! pair and its own (internally homogeneous) pooling-disutility tables.
//! Travel times must be integers here so that the linking constraint indexes
//! `z - d_{r,e}` exactly; the single-population pipeline still accepts
//! fractional times.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::auction::{allocate, greedy_demand, AuctionError};
use crate::cli::{Instance, PopulationSpec};
use crate::equilibrium::{
    build_trip_vector, payments, route_prices, verify_equilibrium, EqError, EquilibriumReport,
    PriceMode, PriceSystem, TripVector,
};
use crate::flowcap::{Slot, SlotSet};
use crate::lp::{self, LinearProgram, Relation, Sense};
use crate::network::{self, arrives_by, Edge, Network, RawNetwork, Route};
use crate::preferences::{Agent, MarketCosts};
use crate::AgentId;

#[derive(Debug, Error)]
pub enum MultiError {
    #[error("agent {0} belongs to no population")]
    Unassigned(AgentId),
    #[error("agent {0} appears in more than one population")]
    Overlap(AgentId),
    #[error("population {0}: unknown member {1}")]
    UnknownMember(String, AgentId),
    #[error("population {0}: members {1} and {2} have different disutility tables")]
    HeterogeneousWithinPopulation(String, AgentId, AgentId),
    #[error("edge {0}: travel times must be integers in multi-population instances")]
    FractionalTravelTime(String),
    #[error("duplicate population id {0}")]
    DuplicatePopulation(String),
    #[error("population {0}: {1}")]
    PopulationNetwork(String, network::NetworkError),
    #[error(transparent)]
    Network(#[from] network::NetworkError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error("column generation exceeded {0} rounds")]
    IterationCapExceeded(usize),
    #[error("branch-and-price exceeded the node cap of {0}")]
    NodeCapExceeded(usize),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Eq(#[from] EqError),
}

/// One population: members share a pooling-disutility table and an
/// origin-destination pair; routes are enumerated on the full network.
#[derive(Debug, Clone)]
pub struct Population {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub members: Vec<AgentId>,
    pub routes: Vec<Route>,
}

/// Validated multi-population instance.
#[derive(Debug, Clone)]
pub struct MultiInstance {
    pub edges: Vec<Edge>,
    pub horizon: u32,
    pub costs: MarketCosts,
    pub agents: Vec<Agent>,
    pub populations: Vec<Population>,
    pub epsilon: Option<f64>,
}

impl MultiInstance {
    pub fn build(
        edges: Vec<Edge>,
        horizon: u32,
        agents: Vec<Agent>,
        costs: MarketCosts,
        pops: Vec<PopulationSpec>,
        epsilon: Option<f64>,
    ) -> Result<MultiInstance, MultiError> {
        for e in &edges {
            if (e.travel_time - e.travel_time.round()).abs() > 1e-9 {
                return Err(MultiError::FractionalTravelTime(e.id.clone()));
            }
        }
        let mut ids = BTreeSet::new();
        let mut assigned: BTreeMap<AgentId, &str> = BTreeMap::new();
        for p in &pops {
            if !ids.insert(p.id.clone()) {
                return Err(MultiError::DuplicatePopulation(p.id.clone()));
            }
            for m in &p.members {
                let agent = agents
                    .iter()
                    .find(|a| a.id == *m)
                    .ok_or_else(|| MultiError::UnknownMember(p.id.clone(), *m))?;
                if assigned.insert(*m, &p.id).is_some() {
                    return Err(MultiError::Overlap(*m));
                }
                let first = agents.iter().find(|a| a.id == p.members[0]).unwrap();
                if !agent.same_disutility(first) {
                    return Err(MultiError::HeterogeneousWithinPopulation(
                        p.id.clone(),
                        first.id,
                        agent.id,
                    ));
                }
            }
        }
        for a in &agents {
            if !assigned.contains_key(&a.id) {
                return Err(MultiError::Unassigned(a.id));
            }
        }
        // Prune edges to the union of population path sets and enumerate
        // per-population routes on the pruned set.
        let pairs: Vec<(String, String)> =
            pops.iter().map(|p| (p.origin.clone(), p.destination.clone())).collect();
        let kept = network::prune_to_pairs(&edges, &pairs);
        let edges: Vec<Edge> =
            edges.into_iter().enumerate().filter(|(i, _)| kept.contains(i)).map(|(_, e)| e).collect();
        let mut populations = Vec::new();
        for p in pops {
            let routes =
                network::enumerate_routes_between(&edges, &p.origin, &p.destination, network::DEFAULT_ROUTE_CAP)
                    .map_err(|e| MultiError::PopulationNetwork(p.id.clone(), e))?;
            if routes.is_empty() {
                return Err(MultiError::PopulationNetwork(
                    p.id.clone(),
                    network::NetworkError::Disconnected(format!(" ({} -> {})", p.origin, p.destination)),
                ));
            }
            populations.push(Population {
                id: p.id,
                origin: p.origin,
                destination: p.destination,
                members: p.members,
                routes,
            });
        }
        Ok(MultiInstance { edges, horizon, costs, agents, populations, epsilon })
    }

    pub fn epsilon_or_default(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            let m = self.agents.len().max(1) as f64;
            (1.0 / (4.0 * m)).min(1e-3)
        })
    }

    fn members_of(&self, p: &Population) -> Vec<Agent> {
        self.agents.iter().filter(|a| p.members.contains(&a.id)).cloned().collect()
    }
}

/// Index space of the capacity-allocation variables `q_r^{i,z}`.
#[derive(Debug, Clone)]
pub struct QIndex {
    /// Lexicographic (population, route, departure) order.
    pub entries: Vec<(usize, usize, u32)>,
}

impl QIndex {
    fn build(inst: &MultiInstance) -> QIndex {
        let mut entries = Vec::new();
        for (pi, p) in inst.populations.iter().enumerate() {
            for (ri, r) in p.routes.iter().enumerate() {
                for z in 1..=inst.horizon {
                    if arrives_by(z, r.total_time, inst.horizon as f64) {
                        entries.push((pi, ri, z));
                    }
                }
            }
        }
        QIndex { entries }
    }
}

/// Branch bounds: per q-variable lower (`q >= ceil`) and upper
/// (`q <= floor`) constraints.
#[derive(Debug, Clone, Default)]
pub struct Bounds {
    pub lower: BTreeMap<usize, u32>,
    pub upper: BTreeMap<usize, u32>,
}

impl Bounds {
    fn consistent(&self) -> bool {
        self.lower.iter().all(|(i, lo)| self.upper.get(i).map_or(true, |hi| lo <= hi))
    }
}

/// A trip column of the restricted master.
#[derive(Debug, Clone)]
pub struct TripColumn {
    pub pop: usize,
    pub route: usize,
    pub z: u32,
    pub group: BTreeSet<AgentId>,
    pub value: f64,
}

/// Growing column pool, shared across the branch-and-price tree (bounds only
/// touch the q variables, so columns stay valid everywhere).
#[derive(Debug, Default)]
pub struct ColumnPool {
    pub columns: Vec<TripColumn>,
    seen: BTreeSet<(usize, usize, u32, Vec<AgentId>)>,
}

impl ColumnPool {
    fn insert(&mut self, col: TripColumn) -> bool {
        let key =
            (col.pop, col.route, col.z, col.group.iter().copied().collect::<Vec<_>>());
        if self.seen.insert(key) {
            self.columns.push(col);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub value: f64,
    /// One entry per `QIndex` position.
    pub q: Vec<f64>,
    /// Largest reduced cost found by the final full pricing sweep; at
    /// optimality this is at most the pricing tolerance.
    pub final_reduced_cost: f64,
}

const PRICING_TOL: f64 = 1e-7;
const COLGEN_CAP: usize = 10_000;

/// Solve the restricted master under branch bounds by column generation:
/// solve over the current pool, price every (population, route, departure)
/// with the greedy demand oracle at the agent duals, add improving columns,
/// repeat to optimality.
pub fn solve_master(
    inst: &MultiInstance,
    qx: &QIndex,
    bounds: &Bounds,
    pool: &mut ColumnPool,
) -> Result<Option<MasterSolution>, SolveError> {
    if !bounds.consistent() {
        return Ok(None);
    }
    let members: Vec<Vec<Agent>> =
        inst.populations.iter().map(|p| inst.members_of(p)).collect();
    for round in 0..COLGEN_CAP {
        let Some((opt, agent_dual, mu_dual)) = solve_restricted(inst, qx, bounds, pool)? else {
            return Ok(None);
        };
        let mut added = false;
        let mut worst = 0.0f64;
        for (qi, &(pi, ri, z)) in qx.entries.iter().enumerate() {
            let prices: BTreeMap<AgentId, f64> =
                members[pi].iter().map(|a| (a.id, *agent_dual.get(&a.id).unwrap_or(&0.0))).collect();
            let (surplus, group) = greedy_demand(
                z,
                ri,
                &inst.populations[pi].routes,
                &members[pi],
                &inst.costs,
                &prices,
            );
            let reduced = surplus - mu_dual[qi];
            worst = worst.max(reduced);
            if reduced > PRICING_TOL && !group.is_empty() {
                let value = surplus + group.iter().map(|id| prices[id]).sum::<f64>();
                added |= pool.insert(TripColumn { pop: pi, route: ri, z, group, value });
            }
        }
        if !added {
            let _ = round;
            return Ok(Some(MasterSolution { value: opt.0, q: opt.1, final_reduced_cost: worst }));
        }

    }
    Err(SolveError::IterationCapExceeded(COLGEN_CAP))
}

/// One restricted-master solve; returns the optimum, per-agent duals and
/// per-q duals.
#[allow(clippy::type_complexity)]
fn solve_restricted(
    inst: &MultiInstance,
    qx: &QIndex,
    bounds: &Bounds,
    pool: &ColumnPool,
) -> Result<Option<((f64, Vec<f64>), BTreeMap<AgentId, f64>, Vec<f64>)>, SolveError> {
    let nq = qx.entries.len();
    let nx = pool.columns.len();
    let nv = nq + nx;
    let mut objective = vec![0.0; nq];
    objective.extend(pool.columns.iter().map(|c| c.value));
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    // Agent rows.
    let agent_ids: Vec<AgentId> = inst.agents.iter().map(|a| a.id).collect();
    for id in &agent_ids {
        let mut row = vec![0.0; nv];
        for (j, c) in pool.columns.iter().enumerate() {
            if c.group.contains(id) {
                row[nq + j] = 1.0;
            }
        }
        lp.push_row(row, Relation::Le, 1.0);
    }
    // Linking of columns to their q variable.
    for (qi, &(pi, ri, z)) in qx.entries.iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[qi] = -1.0;
        for (j, c) in pool.columns.iter().enumerate() {
            if c.pop == pi && c.route == ri && c.z == z {
                row[nq + j] = 1.0;
            }
        }
        lp.push_row(row, Relation::Le, 0.0);
    }
    // Edge-capacity rows over entry ticks.
    let mut edge_rows: BTreeMap<(usize, u32), Vec<f64>> = BTreeMap::new();
    for (qi, &(pi, ri, z)) in qx.entries.iter().enumerate() {
        let route = &inst.populations[pi].routes[ri];
        for (pos, &e) in route.edges.iter().enumerate() {
            let tick = route.entry_tick(z, pos);
            edge_rows.entry((e, tick)).or_insert_with(|| vec![0.0; nv])[qi] += 1.0;
        }
    }
    for ((e, _), row) in edge_rows {
        lp.push_row(row, Relation::Le, inst.edges[e].capacity as f64);
    }
    // Branch bounds.
    for (&qi, &c) in &bounds.lower {
        let mut row = vec![0.0; nv];
        row[qi] = 1.0;
        lp.push_row(row, Relation::Ge, c as f64);
    }
    for (&qi, &c) in &bounds.upper {
        let mut row = vec![0.0; nv];
        row[qi] = 1.0;
        lp.push_row(row, Relation::Le, c as f64);
    }
    match lp::solve(&lp)? {
        lp::Outcome::Optimal(o) => {
            let agent_dual: BTreeMap<AgentId, f64> =
                agent_ids.iter().enumerate().map(|(i, id)| (*id, o.dual[i])).collect();
            let mu: Vec<f64> =
                (0..nq).map(|qi| o.dual[agent_ids.len() + qi]).collect();
            let q = o.primal[..nq].to_vec();
            Ok(Some(((o.value, q), agent_dual, mu)))
        }
        lp::Outcome::Infeasible => Ok(None),
        lp::Outcome::Unbounded => {
            Err(SolveError::Lp(lp::LpError::Shape("master unbounded".into())))
        }
    }
}

/// Per-population equilibrium outcome at a fixed capacity allocation.
#[derive(Debug, Clone)]
pub struct SubmarketOutcome {
    pub population: String,
    pub welfare: f64,
    pub trips: TripVector,
    pub prices: PriceSystem,
    pub report: EquilibriumReport,
    /// Sizes of the organized carpools.
    pub group_sizes: Vec<u32>,
}

/// Run the auction pipeline for one population on route-slot capacities
/// `q_r^{i,z}` and verify the outcome in route mode.
pub fn submarket_equilibrium(
    inst: &MultiInstance,
    pop_idx: usize,
    q_slots: &BTreeMap<(usize, u32), u32>,
) -> Result<SubmarketOutcome, SolveError> {
    let pop = &inst.populations[pop_idx];
    let members = inst.members_of(pop);
    let facade = Instance::build(
        RawNetwork {
            edges: inst.edges.clone(),
            origin: pop.origin.clone(),
            destination: pop.destination.clone(),
            horizon: inst.horizon,
        },
        members.clone(),
        inst.costs.clone(),
        inst.epsilon,
    )
    .map_err(|e| SolveError::Eq(EqError::Infeasible(format!("facade: {e}"))))?;
    // Map population route indices onto the facade's enumeration (the edge
    // sets may differ after per-pair pruning, so match by label sequence).
    let label_of = |r: &Route, edges: &[Edge]| -> Vec<String> {
        r.edges.iter().map(|&e| edges[e].id.clone()).collect()
    };
    let mut facade_route_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (ri, r) in pop.routes.iter().enumerate() {
        let lbl = label_of(r, &inst.edges);
        let fi = facade
            .routes
            .iter()
            .position(|fr| label_of(fr, &facade.network.edges) == lbl)
            .expect("facade enumerates the same routes");
        facade_route_of.insert(ri, fi);
    }
    let mut slots = Vec::new();
    let mut slot_caps: BTreeMap<(usize, u32), u32> = BTreeMap::new();
    for (&(ri, z), &count) in q_slots {
        let fi = facade_route_of[&ri];
        for copy in 0..count {
            slots.push(Slot { route: fi, z, copy });
        }
        if count > 0 {
            slot_caps.insert((fi, z), count);
        }
    }
    slots.sort_by_key(|s| (s.route, s.z, s.copy));
    let slots = SlotSet { slots };
    let epsilon = {
        let m = members.len().max(1) as f64;
        inst.epsilon.unwrap_or_else(|| (1.0 / (4.0 * m)).min(1e-3))
    };
    let auction = allocate(&slots, &facade.routes, &facade.agents, &facade.costs, epsilon)?;
    let trips = build_trip_vector(&auction, &facade)?;
    let welfare = trips.welfare(&facade);
    let (route_price_map, lambda_spread) = route_prices(&auction, &facade);
    let utilities: BTreeMap<AgentId, f64> = facade
        .agents
        .iter()
        .map(|a| {
            let u =
                if trips.trip_of(a.id).is_some() { auction.utilities[&a.id] } else { 0.0 };
            (a.id, u)
        })
        .collect();
    let pay = payments(&trips, &utilities, &facade);
    let prices = PriceSystem {
        route_prices: route_price_map,
        lambda_spread,
        edge_tolls: None,
        utilities,
        payments: pay,
    };
    let report = verify_equilibrium(
        &trips,
        &prices,
        &facade,
        PriceMode::Route,
        epsilon,
        crate::equilibrium::DEFAULT_STABILITY_ENUM_CAP,
        0,
        &slot_caps,
    );
    let group_sizes = trips.trips.iter().map(|t| t.group.len() as u32).collect();
    Ok(SubmarketOutcome {
        population: pop.id.clone(),
        welfare,
        trips,
        prices,
        report,
        group_sizes,
    })
}

#[derive(Debug)]
pub struct BpResult {
    pub value: f64,
    /// Integer capacity allocation at the best leaf, keyed by (population,
    /// route, departure).
    pub q: BTreeMap<(usize, usize, u32), u32>,
    pub submarkets: Vec<SubmarketOutcome>,
    pub nodes_explored: usize,
    pub max_final_reduced_cost: f64,
}

const NODE_CAP: usize = 10_000;
const INT_TOL: f64 = 1e-6;

/// Exact branch-and-price over the capacity allocation: depth-first on the
/// first fractional `q` in (population, route, departure) order, floor and
/// ceil children explored better-bound-first, pruned against the incumbent.
pub fn branch_and_price(inst: &MultiInstance) -> Result<BpResult, SolveError> {
    let qx = QIndex::build(inst);
    let mut pool = ColumnPool::default();
    let mut best: Option<(f64, BTreeMap<(usize, usize, u32), u32>, Vec<SubmarketOutcome>)> = None;
    let mut nodes = 0usize;
    let mut max_rc = 0.0f64;

    struct NodeTask {
        bounds: Bounds,
        solved: Option<MasterSolution>,
    }
    let root = solve_master(inst, &qx, &Bounds::default(), &mut pool)?;
    let mut stack = vec![NodeTask { bounds: Bounds::default(), solved: root }];
    while let Some(task) = stack.pop() {
        nodes += 1;
        if nodes > NODE_CAP {
            return Err(SolveError::NodeCapExceeded(NODE_CAP));
        }
        let Some(master) = task.solved else { continue };
        max_rc = max_rc.max(master.final_reduced_cost);
        if let Some((incumbent, _, _)) = &best {
            if master.value <= incumbent - 1e-9 {
                continue;
            }
        }
        let fractional = master
            .q
            .iter()
            .enumerate()
            .find(|(_, &v)| (v - v.round()).abs() > INT_TOL)
            .map(|(i, &v)| (i, v));
        match fractional {
            None => {
                // Integral leaf: solve each submarket at these capacities.
                let mut q_map: BTreeMap<(usize, usize, u32), u32> = BTreeMap::new();
                let mut per_pop: Vec<BTreeMap<(usize, u32), u32>> =
                    vec![BTreeMap::new(); inst.populations.len()];
                for (qi, &(pi, ri, z)) in qx.entries.iter().enumerate() {
                    let v = master.q[qi].round() as u32;
                    if v > 0 {
                        q_map.insert((pi, ri, z), v);
                        per_pop[pi].insert((ri, z), v);
                    }
                }
                let mut outcomes = Vec::new();
                let mut total = 0.0;
                for pi in 0..inst.populations.len() {
                    let out = submarket_equilibrium(inst, pi, &per_pop[pi])?;
                    total += out.welfare;
                    outcomes.push(out);
                }
                let better = match &best {
                    None => true,
                    Some((v, _, _)) => total > v + 1e-9,
                };
                if better {
                    best = Some((total, q_map, outcomes));
                }
            }
            Some((qi, v)) => {
                let mut lo_child = task.bounds.clone();
                let new_lo = (v.ceil() as u32).max(lo_child.lower.get(&qi).copied().unwrap_or(0));
                lo_child.lower.insert(qi, new_lo);
                let mut hi_child = task.bounds.clone();
                let new_hi =
                    (v.floor() as u32).min(hi_child.upper.get(&qi).copied().unwrap_or(u32::MAX));
                hi_child.upper.insert(qi, new_hi);
                let lo_solved = solve_master(inst, &qx, &lo_child, &mut pool)?;
                let hi_solved = solve_master(inst, &qx, &hi_child, &mut pool)?;
                let bound = |s: &Option<MasterSolution>| s.as_ref().map_or(f64::MIN, |m| m.value);
                let mut children = vec![
                    NodeTask { bounds: lo_child, solved: lo_solved },
                    NodeTask { bounds: hi_child, solved: hi_solved },
                ];
                // Better bound explored first (pushed last).
                children.sort_by(|a, b| bound(&a.solved).partial_cmp(&bound(&b.solved)).unwrap());
                stack.extend(children);
            }
        }
    }
    let (value, q, submarkets) = best.unwrap_or((0.0, BTreeMap::new(), Vec::new()));
    Ok(BpResult { value, q, submarkets, nodes_explored: nodes, max_final_reduced_cost: max_rc })
}

/// Validate-only entry used by the loader.
impl MultiInstance {
    /// Induced single-market view of one population over the full edge set.
    pub fn population_network(&self, pop_idx: usize) -> Result<Network, network::NetworkError> {
        let p = &self.populations[pop_idx];
        Network::validate(&RawNetwork {
            edges: self.edges.clone(),
            origin: p.origin.clone(),
            destination: p.destination.clone(),
            horizon: self.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preferences::{DelayFn, DisutilityTable};

    fn edge(id: &str, tail: &str, head: &str, q: u32, d: f64) -> Edge {
        Edge { id: id.into(), tail: tail.into(), head: head.into(), capacity: q, travel_time: d }
    }

    fn unit_agent(id: AgentId, theta: f64) -> Agent {
        Agent {
            id,
            alpha: 1.0,
            beta: 0.0,
            theta,
            delay: DelayFn::HardDeadline,
            pi: DisutilityTable::zero(1),
            gamma: DisutilityTable::zero(1),
        }
    }

    fn pop_spec(id: &str, members: Vec<AgentId>, o: &str, d: &str) -> PopulationSpec {
        PopulationSpec { id: id.into(), members, origin: o.into(), destination: d.into() }
    }

    /// Two unit-demand populations with a common origin: in the first graph
    /// their paths are edge-disjoint, in the second they must share edges.
    fn disjoint_paths_instance(shared: bool) -> MultiInstance {
        let edges = if shared {
            vec![
                edge("e1", "n1", "n2", 1, 1.0),
                edge("e2", "n2", "n3", 1, 1.0),
                edge("e3", "n3", "n4", 1, 1.0),
            ]
        } else {
            vec![
                edge("e1", "n1", "n2", 1, 1.0),
                edge("e2", "n2", "n4", 1, 1.0),
                edge("e3", "n1", "n3", 1, 1.0),
            ]
        };
        let agents = vec![unit_agent(1, if shared { 4.0 } else { 3.0 }), unit_agent(2, 3.0)];
        let pops = vec![
            pop_spec("A", vec![1], "n1", "n4"),
            pop_spec("B", vec![2], "n1", "n3"),
        ];
        MultiInstance::build(
            edges,
            4,
            agents,
            MarketCosts { sigma: 0.0, delta: 0.0, vehicle_capacity: 1 },
            pops,
            None,
        )
        .unwrap()
    }

    #[test]
    fn build_rejects_bad_partitions_and_fractional_times() {
        let edges = vec![edge("e1", "o", "d", 1, 1.0)];
        let agents = vec![unit_agent(1, 2.0), unit_agent(2, 2.0)];
        let costs = MarketCosts { sigma: 0.0, delta: 0.0, vehicle_capacity: 1 };
        // agent 2 unassigned
        let r = MultiInstance::build(
            edges.clone(),
            2,
            agents.clone(),
            costs.clone(),
            vec![pop_spec("A", vec![1], "o", "d")],
            None,
        );
        assert!(matches!(r, Err(MultiError::Unassigned(2))));
        // overlap
        let r = MultiInstance::build(
            edges.clone(),
            2,
            agents.clone(),
            costs.clone(),
            vec![pop_spec("A", vec![1, 2], "o", "d"), pop_spec("B", vec![2], "o", "d")],
            None,
        );
        assert!(matches!(r, Err(MultiError::Overlap(2))));
        // fractional travel time
        let r = MultiInstance::build(
            vec![edge("e1", "o", "d", 1, 1.5)],
            2,
            agents.clone(),
            costs.clone(),
            vec![pop_spec("A", vec![1, 2], "o", "d")],
            None,
        );
        assert!(matches!(r, Err(MultiError::FractionalTravelTime(_))));
        // heterogeneous tables within one population
        let mut hetero = agents.clone();
        hetero[1].pi = DisutilityTable(vec![Some(0.0)]);
        hetero[1].gamma = DisutilityTable(vec![Some(0.0)]);
        let mut different = hetero.clone();
        different[1].pi = DisutilityTable(vec![Some(0.0), Some(1.0)]);
        let r = MultiInstance::build(
            edges,
            2,
            different,
            costs,
            vec![pop_spec("A", vec![1, 2], "o", "d")],
            None,
        );
        assert!(matches!(r, Err(MultiError::HeterogeneousWithinPopulation(..))));
    }

    #[test]
    fn single_population_reduces_to_base_solver() {
        // One population on a single edge: branch-and-price must equal the
        // plain pipeline welfare without branching.
        let edges = vec![edge("e1", "o", "d", 1, 1.0)];
        let agents = vec![unit_agent(1, 3.0), unit_agent(2, 3.0)];
        let inst = MultiInstance::build(
            edges,
            3,
            agents,
            MarketCosts { sigma: 0.0, delta: 0.0, vehicle_capacity: 1 },
            vec![pop_spec("A", vec![1, 2], "o", "d")],
            None,
        )
        .unwrap();
        let bp = branch_and_price(&inst).unwrap();
        assert!((bp.value - 2.0).abs() < 1e-9, "both agents ride solo: {}", bp.value);
        assert!(bp.max_final_reduced_cost <= PRICING_TOL);
        for s in &bp.submarkets {
            assert!(s.report.pass(), "{:?}", s.report);
        }
    }

    #[test]
    fn forced_zero_capacity_gives_zero_value() {
        let edges = vec![edge("e1", "o", "d", 1, 1.0)];
        let inst = MultiInstance::build(
            edges,
            2,
            vec![unit_agent(1, 2.0)],
            MarketCosts { sigma: 0.0, delta: 0.0, vehicle_capacity: 1 },
            vec![pop_spec("A", vec![1], "o", "d")],
            None,
        )
        .unwrap();
        let qx = QIndex::build(&inst);
        let mut pool = ColumnPool::default();
        let mut bounds = Bounds::default();
        for qi in 0..qx.entries.len() {
            bounds.upper.insert(qi, 0);
        }
        let sol = solve_master(&inst, &qx, &bounds, &mut pool).unwrap().unwrap();
        assert!(sol.value.abs() < 1e-9);
    }

    #[test]
    fn edge_disjoint_reduction_yields_two_or_one() {
        let free = disjoint_paths_instance(false);
        let bp = branch_and_price(&free).unwrap();
        assert!((bp.value - 2.0).abs() < 1e-9, "disjoint graph welfare {}", bp.value);
        let shared = disjoint_paths_instance(true);
        let bp = branch_and_price(&shared).unwrap();
        assert!((bp.value - 1.0).abs() < 1e-9, "shared-edge graph welfare {}", bp.value);
    }

    #[test]
    fn master_value_decreases_down_the_tree() {
        let inst = disjoint_paths_instance(true);
        let qx = QIndex::build(&inst);
        let mut pool = ColumnPool::default();
        let root = solve_master(&inst, &qx, &Bounds::default(), &mut pool).unwrap().unwrap();
        let mut bounds = Bounds::default();
        bounds.upper.insert(0, 0);
        if let Some(child) = solve_master(&inst, &qx, &bounds, &mut pool).unwrap() {
            assert!(child.value <= root.value + 1e-9);
        }
    }
}
