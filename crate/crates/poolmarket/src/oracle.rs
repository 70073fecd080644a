//! Independent brute-force ground truth: exact IP/LP optima over the full
//! trip space, gross-substitutes and monotonicity auditing, time-expanded
//! max flow, and dual-vertex sampling.
//!
//! These oracles share nothing with the solver pipeline beyond the
//! preference formulas, so agreement between the two is evidence. They are
//! deliberately exhaustive and guarded by instance-size caps.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::cli::Instance;
use crate::lp::{self, LinearProgram, Relation, Sense};
use crate::network::{arrives_by, Network};
use crate::preferences::trip_value;
use crate::AgentId;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for the oracle: {0}")]
    InstanceTooLarge(String),
    #[error("time-expanded graph too large: {0} nodes")]
    TooLarge(usize),
    #[error("value table incomplete: missing {0:?}")]
    OracleIncomplete(Vec<AgentId>),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error("lp unexpectedly {0}")]
    UnexpectedLpOutcome(String),
}

/// Size caps guarding the exhaustive searches.
#[derive(Debug, Clone)]
pub struct OracleCaps {
    pub max_agents: usize,
    pub max_routes: usize,
    pub max_horizon: u32,
    pub max_te_nodes: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps { max_agents: 8, max_routes: 6, max_horizon: 6, max_te_nodes: 10_000 }
    }
}

impl OracleCaps {
    fn admit(&self, inst: &Instance) -> Result<(), OracleError> {
        if inst.agents.len() > self.max_agents {
            return Err(OracleError::InstanceTooLarge(format!(
                "{} agents > cap {}",
                inst.agents.len(),
                self.max_agents
            )));
        }
        if inst.routes.len() > self.max_routes {
            return Err(OracleError::InstanceTooLarge(format!(
                "{} routes > cap {}",
                inst.routes.len(),
                self.max_routes
            )));
        }
        if inst.horizon() > self.max_horizon {
            return Err(OracleError::InstanceTooLarge(format!(
                "horizon {} > cap {}",
                inst.horizon(),
                self.max_horizon
            )));
        }
        Ok(())
    }
}

/// One feasible, finite-valued trip column.
#[derive(Debug, Clone, PartialEq)]
pub struct TripCandidate {
    pub z: u32,
    pub route: usize,
    pub group: Vec<AgentId>,
    pub value: f64,
}

/// Every feasible trip with a finite value, in canonical (z, route, group
/// mask) order. Group masks run over agents sorted by id.
pub fn enumerate_trips(inst: &Instance, caps: &OracleCaps) -> Result<Vec<TripCandidate>, OracleError> {
    caps.admit(inst)?;
    let n = inst.agents.len();
    let cap = inst.costs.vehicle_capacity.min(n as u32);
    let mut out = Vec::new();
    for z in 1..=inst.horizon() {
        for (ri, route) in inst.routes.iter().enumerate() {
            if !arrives_by(z, route.total_time, inst.horizon() as f64) {
                continue;
            }
            for mask in 1u64..(1 << n) {
                if mask.count_ones() > cap {
                    continue;
                }
                let group: Vec<&crate::preferences::Agent> =
                    (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &inst.agents[i]).collect();
                if let Some(v) =
                    trip_value(z, route.total_time, &group, &inst.costs).expect("size within cap")
                {
                    out.push(TripCandidate {
                        z,
                        route: ri,
                        group: group.iter().map(|a| a.id).collect(),
                        value: v,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Capacity resources a trip consumes: one unit of each (edge, entry tick).
fn edge_tick_resources(inst: &Instance) -> (Vec<u32>, HashMap<(usize, u32), usize>) {
    let mut index: HashMap<(usize, u32), usize> = HashMap::new();
    let mut caps: Vec<u32> = Vec::new();
    for route in &inst.routes {
        for z in 1..=inst.horizon() {
            if !arrives_by(z, route.total_time, inst.horizon() as f64) {
                continue;
            }
            for (pos, &e) in route.edges.iter().enumerate() {
                let key = (e, route.entry_tick(z, pos));
                index.entry(key).or_insert_with(|| {
                    caps.push(inst.network.edges[e].capacity);
                    caps.len() - 1
                });
            }
        }
    }
    (caps, index)
}

struct IpCandidate {
    value: f64,
    agents: u64,
    resources: Vec<usize>,
}

/// Exact optimum of a weighted trip-packing problem: agents used at most
/// once, every resource within its cap. Returns the optimal value and the
/// lexicographically smallest optimal candidate-index set (take-first DFS in
/// canonical order among exact optima).
fn ip_core(cands: &[IpCandidate], res_caps: &[u32]) -> (f64, Vec<usize>) {
    // Pass 1: best value via value-ordered branch and bound. Each trip uses
    // at least one agent and one unit of some resource, so the top-k
    // remaining values (k = min(agents left, residual capacity)) bound any
    // completion.
    let mut order: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].value > 1e-12).collect();
    order.sort_by(|&a, &b| {
        cands[b]
            .value
            .partial_cmp(&cands[a].value)
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| cands[i].value).collect();
    let mut prefix = vec![0.0; values.len() + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let total_agents: u32 = {
        let mut m = 0u64;
        for c in cands {
            m |= c.agents;
        }
        m.count_ones()
    };
    struct S1<'a> {
        cands: &'a [IpCandidate],
        order: &'a [usize],
        prefix: &'a [f64],
        usage: Vec<u32>,
        caps: &'a [u32],
        best: f64,
    }
    fn dfs1(s: &mut S1, pos: usize, used_agents: u64, agents_left: u32, res_budget: u32, acc: f64) {
        if acc > s.best {
            s.best = acc;
        }
        if pos >= s.order.len() {
            return;
        }
        let k = agents_left.min(res_budget) as usize;
        let hi = (pos + k).min(s.order.len());
        if acc + (s.prefix[hi] - s.prefix[pos]) <= s.best + 1e-12 {
            return;
        }
        let ci = s.order[pos];
        let c = &s.cands[ci];
        let fits = (c.agents & used_agents) == 0
            && c.resources.iter().all(|&r| s.usage[r] < s.caps[r]);
        if fits {
            for &r in &c.resources {
                s.usage[r] += 1;
            }
            dfs1(
                s,
                pos + 1,
                used_agents | c.agents,
                agents_left - c.agents.count_ones(),
                res_budget - c.resources.len().min(1) as u32,
                acc + c.value,
            );
            for &r in &c.resources {
                s.usage[r] -= 1;
            }
        }
        dfs1(s, pos + 1, used_agents, agents_left, res_budget, acc);
    }
    let res_budget: u32 = res_caps.iter().sum();
    let mut s1 = S1 { cands, order: &order, prefix: &prefix, usage: vec![0; res_caps.len()], caps: res_caps, best: 0.0 };
    dfs1(&mut s1, 0, 0, total_agents, res_budget, 0.0);
    let best = s1.best;

    // Pass 2: lexicographically smallest optimal set, take-first DFS in
    // canonical candidate order, pruned to exact optima only.
    struct S2<'a> {
        cands: &'a [IpCandidate],
        suffix_pos: Vec<f64>,
        usage: Vec<u32>,
        caps: &'a [u32],
        target: f64,
        found: Option<Vec<usize>>,
    }
    fn dfs2(s: &mut S2, i: usize, used_agents: u64, acc: f64, chosen: &mut Vec<usize>) -> bool {
        if acc >= s.target - 1e-9 {
            s.found = Some(chosen.clone());
            return true;
        }
        if i >= s.cands.len() || acc + s.suffix_pos[i] < s.target - 1e-9 {
            return false;
        }
        let c = &s.cands[i];
        let fits = c.value > 1e-12
            && (c.agents & used_agents) == 0
            && c.resources.iter().all(|&r| s.usage[r] < s.caps[r]);
        if fits {
            for &r in &c.resources {
                s.usage[r] += 1;
            }
            chosen.push(i);
            if dfs2(s, i + 1, used_agents | c.agents, acc + c.value, chosen) {
                return true;
            }
            chosen.pop();
            for &r in &c.resources {
                s.usage[r] -= 1;
            }
        }
        dfs2(s, i + 1, used_agents, acc, chosen)
    }
    let mut suffix_pos = vec![0.0; cands.len() + 1];
    for i in (0..cands.len()).rev() {
        suffix_pos[i] = suffix_pos[i + 1] + cands[i].value.max(0.0);
    }
    let mut s2 = S2 {
        cands,
        suffix_pos,
        usage: vec![0; res_caps.len()],
        caps: res_caps,
        target: best,
        found: None,
    };
    let mut chosen = Vec::new();
    dfs2(&mut s2, 0, 0, 0.0, &mut chosen);
    (best, s2.found.unwrap_or_default())
}

fn agent_mask(inst: &Instance, group: &[AgentId]) -> u64 {
    let mut mask = 0u64;
    for id in group {
        let i = inst.agents.iter().position(|a| a.id == *id).expect("known agent");
        mask |= 1 << i;
    }
    mask
}

#[derive(Debug, Clone)]
pub struct IpOpt {
    pub value: f64,
    pub trips: Vec<TripCandidate>,
}

/// Socially optimal integer trip organization by exhaustive search.
pub fn ip_optimum(inst: &Instance, caps: &OracleCaps) -> Result<IpOpt, OracleError> {
    let trips = enumerate_trips(inst, caps)?;
    let (res_caps, res_index) = edge_tick_resources(inst);
    let cands: Vec<IpCandidate> = trips
        .iter()
        .map(|t| IpCandidate {
            value: t.value,
            agents: agent_mask(inst, &t.group),
            resources: inst.routes[t.route]
                .edges
                .iter()
                .enumerate()
                .map(|(pos, &e)| res_index[&(e, inst.routes[t.route].entry_tick(t.z, pos))])
                .collect(),
        })
        .collect();
    let (value, chosen) = ip_core(&cands, &res_caps);
    Ok(IpOpt { value, trips: chosen.into_iter().map(|i| trips[i].clone()).collect() })
}

/// Exact optimum under per-(route, departure) slot capacities instead of
/// edge capacities; the per-submarket subproblem of the multi-population
/// solver.
pub fn ip_optimum_slots(
    inst: &Instance,
    slot_caps: &BTreeMap<(usize, u32), u32>,
    caps: &OracleCaps,
) -> Result<IpOpt, OracleError> {
    let trips = enumerate_trips(inst, caps)?;
    let keys: Vec<(usize, u32)> = slot_caps.keys().copied().collect();
    let index: HashMap<(usize, u32), usize> =
        keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let res_caps: Vec<u32> = keys.iter().map(|k| slot_caps[k]).collect();
    let mut cands = Vec::new();
    let mut kept = Vec::new();
    for t in &trips {
        match index.get(&(t.route, t.z)) {
            Some(&r) if res_caps[r] > 0 => {
                cands.push(IpCandidate {
                    value: t.value,
                    agents: agent_mask(inst, &t.group),
                    resources: vec![r],
                });
                kept.push(t.clone());
            }
            _ => {}
        }
    }
    let (value, chosen) = ip_core(&cands, &res_caps);
    Ok(IpOpt { value, trips: chosen.into_iter().map(|i| kept[i].clone()).collect() })
}

#[derive(Debug, Clone)]
pub struct LpOpt {
    pub value: f64,
    /// Nonzero trip weights.
    pub assignment: Vec<(TripCandidate, f64)>,
    pub fractional: bool,
    /// Duals: per-agent utilities and per-(edge id, tick) prices.
    pub utilities: BTreeMap<AgentId, f64>,
    pub edge_prices: BTreeMap<(String, u32), f64>,
}

/// Linear relaxation over the explicit trip-column set.
pub fn lp_optimum(inst: &Instance, caps: &OracleCaps) -> Result<LpOpt, OracleError> {
    let trips = enumerate_trips(inst, caps)?;
    let n = trips.len();
    let (res_caps, res_index) = edge_tick_resources(inst);
    let mut lp = LinearProgram::new(Sense::Maximize, trips.iter().map(|t| t.value).collect());
    // one row per agent
    for a in &inst.agents {
        let coeffs: Vec<f64> =
            trips.iter().map(|t| if t.group.contains(&a.id) { 1.0 } else { 0.0 }).collect();
        lp.push_row(coeffs, Relation::Le, 1.0);
    }
    // one row per used (edge, tick)
    let mut res_rows: Vec<Vec<f64>> = vec![vec![0.0; n]; res_caps.len()];
    for (j, t) in trips.iter().enumerate() {
        let route = &inst.routes[t.route];
        for (pos, &e) in route.edges.iter().enumerate() {
            let r = res_index[&(e, route.entry_tick(t.z, pos))];
            res_rows[r][j] += 1.0;
        }
    }
    for (r, row) in res_rows.into_iter().enumerate() {
        lp.push_row(row, Relation::Le, res_caps[r] as f64);
    }
    let out = lp::solve(&lp)?;
    let opt = out
        .optimal()
        .ok_or_else(|| OracleError::UnexpectedLpOutcome(format!("{out:?}")))?;
    let mut assignment = Vec::new();
    let mut fractional = false;
    for (j, &x) in opt.primal.iter().enumerate() {
        if x > 1e-9 {
            assignment.push((trips[j].clone(), x));
        }
        if (x - x.round()).abs() > 1e-6 {
            fractional = true;
        }
    }
    let utilities: BTreeMap<AgentId, f64> =
        inst.agents.iter().enumerate().map(|(i, a)| (a.id, opt.dual[i])).collect();
    let mut edge_prices = BTreeMap::new();
    for (&(e, tick), &r) in &res_index {
        let y = opt.dual[inst.agents.len() + r];
        if y.abs() > 1e-12 {
            edge_prices.insert((inst.network.edges[e].id.clone(), tick), y);
        }
    }
    Ok(LpOpt { value: opt.value, assignment, fractional, utilities, edge_prices })
}

/// Abstract set-valued oracle for the structure checkers: either an explicit
/// table or the augmented value of a (z, route) context, computed here by
/// brute force over subgroups (independent of the solver's greedy).
pub enum ValueOracle<'a> {
    Table(&'a BTreeMap<Vec<AgentId>, f64>),
    Slot { instance: &'a Instance, z: u32, route: usize },
}

impl ValueOracle<'_> {
    fn eval(&self, set: &[AgentId]) -> Result<f64, OracleError> {
        match self {
            ValueOracle::Table(t) => {
                if set.is_empty() {
                    return Ok(t.get(&Vec::new()).copied().unwrap_or(0.0));
                }
                t.get(&set.to_vec()).copied().ok_or              (OracleError::OracleIncomplete(set.to_vec()))
            }
            ValueOracle::Slot { instance, z, route } => {
                let members: Vec<&crate::preferences::Agent> =
                    set.iter().map(|id| instance.agent_by_id(*id).expect("known agent")).collect();
                let k = members.len();
                let d_r = instance.routes[*route].total_time;
                let mut best = 0.0f64;
                for mask in 1u32..(1 << k) {
                    if mask.count_ones() > instance.costs.vehicle_capacity {
                        continue;
                    }
                    let sub: Vec<&crate::preferences::Agent> =
                        (0..k).filter(|i| mask & (1 << i) != 0).map(|i| members[i]).collect();
                    if let Some(v) =
                        trip_value(*z, d_r, &sub, &instance.costs).expect("within capacity")
                    {
                        best = best.max(v);
                    }
                }
                Ok(best)
            }
        }
    }
}

/// Precomputed values for every subset of the ground set (bit i of a mask is
/// the i-th smallest id).
struct SubsetValues {
    ground: Vec<AgentId>,
    values: Vec<f64>,
}

impl SubsetValues {
    fn compute(oracle: &ValueOracle, ground: &[AgentId]) -> Result<SubsetValues, OracleError> {
        let mut g = ground.to_vec();
        g.sort_unstable();
        let n = g.len();
        let mut values = Vec::with_capacity(1 << n);
        for mask in 0u32..(1 << n) {
            let set: Vec<AgentId> =
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| g[i]).collect();
            values.push(oracle.eval(&set)?);
        }
        Ok(SubsetValues { ground: g, values })
    }

    fn ids(&self, mask: u32) -> Vec<AgentId> {
        (0..self.ground.len()).filter(|i| mask & (1 << i) != 0).map(|i| self.ground[i]).collect()
    }
}

/// Definition of a gross-substitutes violation: the first failing case in
/// deterministic order, with the evaluated quantities.
#[derive(Debug, Clone, PartialEq)]
pub enum GsViolation {
    /// `f(i | sup) > f(i | sub)` for `sub ⊆ sup`.
    Submodularity { sub: Vec<AgentId>, sup: Vec<AgentId>, item: AgentId, lhs: f64, rhs: f64 },
    /// `f(i,j|b) + f(k|b) > max(f(i|b) + f(j,k|b), f(j|b) + f(i,k|b))`.
    Triple {
        base: Vec<AgentId>,
        i: AgentId,
        j: AgentId,
        k: AgentId,
        lhs: f64,
        rhs_ij: f64,
        rhs_ji: f64,
    },
}

const GS_TOL: f64 = 1e-9;

/// Exhaustive gross-substitutes check (both conditions) on ground sets of up
/// to ~10 agents.
pub fn gs_check(oracle: &ValueOracle, ground: &[AgentId]) -> Result<Option<GsViolation>, OracleError> {
    if ground.len() > 10 {
        return Err(OracleError::InstanceTooLarge(format!("{} agents > 10", ground.len())));
    }
    let sv = SubsetValues::compute(oracle, ground)?;
    let n = sv.ground.len() as u32;
    let full: u32 = if n == 64 { u32::MAX } else { (1 << n) - 1 };
    let f = |mask: u32| sv.values[mask as usize];
    // Condition (i): marginals weakly shrink as the base grows.
    for sup in 0u32..=full {
        let mut sub = sup;
        loop {
            for i in 0..n {
                let bit = 1 << i;
                if sup & bit == 0 {
                    let lhs = f(sup | bit) - f(sup);
                    let rhs = f(sub | bit) - f(sub);
                    if lhs > rhs + GS_TOL {
                        return Ok(Some(GsViolation::Submodularity {
                            sub: sv.ids(sub),
                            sup: sv.ids(sup),
                            item: sv.ground[i as usize],
                            lhs,
                            rhs,
                        }));
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & sup;
        }
    }
    // Condition (ii): the triple condition, canonicalized i < j.
    for base in 0u32..=full {
        for i in 0..n {
            if base & (1 << i) != 0 {
                continue;
            }
            for j in (i + 1)..n {
                if base & (1 << j) != 0 {
                    continue;
                }
                for k in 0..n {
                    if k == i || k == j || base & (1 << k) != 0 {
                        continue;
                    }
                    let (bi, bj, bk) = (1u32 << i, 1u32 << j, 1u32 << k);
                    let lhs = f(base | bi | bj) - f(base) + f(base | bk) - f(base);
                    let rhs_ij = f(base | bi) - f(base) + f(base | bj | bk) - f(base);
                    let rhs_ji = f(base | bj) - f(base) + f(base | bi | bk) - f(base);
                    if lhs > rhs_ij.max(rhs_ji) + GS_TOL {
                        return Ok(Some(GsViolation::Triple {
                            base: sv.ids(base),
                            i: sv.ground[i as usize],
                            j: sv.ground[j as usize],
                            k: sv.ground[k as usize],
                            lhs,
                            rhs_ij,
                            rhs_ji,
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// First monotonicity violation `f(b) > f(b ∪ {i})`, if any.
pub fn monotonicity_check(
    oracle: &ValueOracle,
    ground: &[AgentId],
) -> Result<Option<(Vec<AgentId>, Vec<AgentId>)>, OracleError> {
    if ground.len() > 10 {
        return Err(OracleError::InstanceTooLarge(format!("{} agents > 10", ground.len())));
    }
    let sv = SubsetValues::compute(oracle, ground)?;
    let n = sv.ground.len() as u32;
    let full: u32 = (1 << n) - 1;
    for base in 0u32..=full {
        for i in 0..n {
            let bit = 1 << i;
            if base & bit == 0 && sv.values[base as usize] > sv.values[(base | bit) as usize] + GS_TOL {
                return Ok(Some((sv.ids(base), sv.ids(base | bit))));
            }
        }
    }
    Ok(None)
}

/// Maximum number of vehicles that can reach the destination by time `t`,
/// on the time-expanded graph with one capacity-`q_e` arc per (edge, entry
/// time). Integer travel times make this the per-tick discretization; real
/// travel times expand at exact event times.
pub fn time_expanded_maxflow(net: &Network, t: u32, caps: &OracleCaps) -> Result<u64, OracleError> {
    type TimeKey = i64;
    let key = |x: f64| -> TimeKey { (x * 1e9).round() as TimeKey };
    // Forward expansion from all departures.
    let mut node_ids: HashMap<(usize, TimeKey), usize> = HashMap::new();
    let mut node_list: Vec<(usize, TimeKey)> = Vec::new();
    let mut names: HashMap<&str, usize> = HashMap::new();
    let mut name_list: Vec<&str> = Vec::new();
    for e in &net.edges {
        for v in [&e.tail, &e.head] {
            if !names.contains_key(v.as_str()) {
                names.insert(v, name_list.len());
                name_list.push(v);
            }
        }
    }
    let origin = names[net.origin.as_str()];
    let dest = names[net.destination.as_str()];
    let mut intern = |node: (usize, TimeKey),
                      node_ids: &mut HashMap<(usize, TimeKey), usize>,
                      node_list: &mut Vec<(usize, TimeKey)>| {
        *node_ids.entry(node).or_insert_with(|| {
            node_list.push(node);
            node_list.len() - 1
        })
    };
    let mut arcs: Vec<(usize, usize, u64)> = Vec::new(); // (from, to, cap)
    let mut stack: Vec<(usize, TimeKey)> = Vec::new();
    for z in 1..=t {
        let node = (origin, key(z as f64));
        if !node_ids.contains_key(&node) {
            intern(node, &mut node_ids, &mut node_list);
            stack.push(node);
        }
    }
    let mut expanded: BTreeSet<(usize, TimeKey)> = BTreeSet::new();
    while let Some((v, tk)) = stack.pop() {
        if !expanded.insert((v, tk)) {
            continue;
        }
        if node_list.len() > caps.max_te_nodes {
            return Err(OracleError::TooLarge(node_list.len()));
        }
        let tau = tk as f64 / 1e9;
        for (ei, e) in net.edges.iter().enumerate() {
            if names[e.tail.as_str()] != v {
                continue;
            }
            let arrive = tau + e.travel_time;
            if arrive > t as f64 + crate::TIME_TOL {
                continue;
            }
            let from = node_ids[&(v, tk)];
            let to_node = (names[e.head.as_str()], key(arrive));
            let known = node_ids.contains_key(&to_node);
            let to = intern(to_node, &mut node_ids, &mut node_list);
            arcs.push((from, to, net.edges[ei].capacity as u64));
            if !known {
                stack.push(to_node);
            }
        }
    }
    // Source/sink and Edmonds-Karp.
    let n = node_list.len();
    let (s, snk) = (n, n + 1);
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); n + 2];
    let mut cap_of: Vec<u64> = Vec::new();
    let mut to_of: Vec<usize> = Vec::new();
    let mut add = |graph: &mut Vec<Vec<usize>>, cap_of: &mut Vec<u64>, to_of: &mut Vec<usize>, u: usize, v: usize, c: u64| {
        graph[u].push(cap_of.len());
        to_of.push(v);
        cap_of.push(c);
        graph[v].push(cap_of.len());
        to_of.push(u);
        cap_of.push(0);
    };
    for (u, v, c) in &arcs {
        add(&mut graph, &mut cap_of, &mut to_of, *u, *v, *c);
    }
    for (i, &(v, _)) in node_list.iter().enumerate() {
        if v == origin {
            add(&mut graph, &mut cap_of, &mut to_of, s, i, u64::MAX / 4);
        }
        if v == dest {
            add(&mut graph, &mut cap_of, &mut to_of, i, snk, u64::MAX / 4);
        }
    }
    let mut flow = 0u64;
    loop {
        let mut pred: Vec<Option<usize>> = vec![None; n + 2];
        let mut queue = std::collections::VecDeque::from([s]);
        let mut seen = vec![false; n + 2];
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            for &a in &graph[u] {
                let v = to_of[a];
                if !seen[v] && cap_of[a] > 0 {
                    seen[v] = true;
                    pred[v] = Some(a);
                    queue.push_back(v);
                }
            }
        }
        if !seen[snk] {
            break;
        }
        let mut bottleneck = u64::MAX;
        let mut v = snk;
        while v != s {
            let a = pred[v].unwrap();
            bottleneck = bottleneck.min(cap_of[a]);
            v = to_of[a ^ 1];
        }
        let mut v = snk;
        while v != s {
            let a = pred[v].unwrap();
            cap_of[a] -= bottleneck;
            cap_of[a ^ 1] += bottleneck;
            v = to_of[a ^ 1];
        }
        flow += bottleneck;
    }
    Ok(flow)
}

/// A dual-optimal point of the full dual program: utilities and edge prices.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub utilities: BTreeMap<AgentId, f64>,
    pub tolls: BTreeMap<(String, u32), f64>,
    pub toll_total: f64,
}

/// Sample optimal solutions of the dual (utilities + edge prices) by pinning
/// the optimal objective and optimizing random nonnegative weights on the
/// utilities, alternating min and max.
pub fn dual_vertex_sample(
    inst: &Instance,
    count: usize,
    seed: u64,
    caps: &OracleCaps,
) -> Result<Vec<DualPoint>, OracleError> {
    use rand::{Rng, SeedableRng};
    let trips = enumerate_trips(inst, caps)?;
    let n_agents = inst.agents.len();
    let horizon = inst.horizon();
    let n_tolls = inst.network.edges.len() * horizon as usize;
    let nv = n_agents + n_tolls;
    let toll_var = |e: usize, tick: u32| n_agents + e * horizon as usize + (tick - 1) as usize;
    let mut base = LinearProgram::new(Sense::Minimize, {
        let mut c = vec![1.0; n_agents];
        for e in &inst.network.edges {
            for _ in 1..=horizon {
                c.push(e.capacity as f64);
            }
        }
        c
    });
    for t in &trips {
        let mut row = vec![0.0; nv];
        for id in &t.group {
            let i = inst.agents.iter().position(|a| a.id == *id).unwrap();
            row[i] = 1.0;
        }
        let route = &inst.routes[t.route];
        for (pos, &e) in route.edges.iter().enumerate() {
            row[toll_var(e, route.entry_tick(t.z, pos))] += 1.0;
        }
        base.push_row(row, Relation::Ge, t.value);
    }
    let first = lp::solve(&base)?;
    let opt = first
        .optimal()
        .ok_or_else(|| OracleError::UnexpectedLpOutcome(format!("{first:?}")))?;
    let dual_value = opt.value;
    let mut pinned = base.clone();
    {
        let mut row = vec![1.0; n_agents];
        for e in &inst.network.edges {
            for _ in 1..=horizon {
                row.push(e.capacity as f64);
            }
        }
        pinned.push_row(row, Relation::Le, dual_value + 1e-9);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 0..count {
        let mut lp = pinned.clone();
        lp.sense = if k % 2 == 0 { Sense::Maximize } else { Sense::Minimize };
        lp.objective = vec![0.0; nv];
        for j in 0..n_agents {
            lp.objective[j] = rng.gen_range(0.1..1.1);
        }
        let sol = lp::solve(&lp)?;
        let o = sol
            .optimal()
            .ok_or_else(|| OracleError::UnexpectedLpOutcome(format!("{sol:?}")))?;
        let utilities: BTreeMap<AgentId, f64> =
            inst.agents.iter().enumerate().map(|(i, a)| (a.id, o.primal[i])).collect();
        let mut tolls = BTreeMap::new();
        let mut toll_total = 0.0;
        for (e, edge) in inst.network.edges.iter().enumerate() {
            for tick in 1..=horizon {
                let v = o.primal[toll_var(e, tick)];
                if v > 1e-12 {
                    tolls.insert((edge.id.clone(), tick), v);
                    toll_total += edge.capacity as f64 * v;
                }
            }
        }
        out.push(DualPoint { utilities, tolls, toll_total });
    }
    Ok(out)
}
