//! Step 2 of the equilibrium computation: an ascending auction over slots
//! (the modified Kelso-Crawford procedure) assigning agents to route-departure
//! slots and producing the Walrasian utility vector.
//!
//! Slots are buyers, agents are indivisible goods, and each slot values an
//! agent pool by the augmented trip value of its representative group. Under
//! homogeneous pooling disutilities the augmented value is monotone and
//! gross-substitutes, so per-slot demand is computed greedily: candidates are
//! scanned in descending `eta - u` order and the tentative representative
//! group, its marginal `lambda`, and the slot surplus `phi` are updated by a
//! three-case rule (join, join-at-bottom, displace) without recomputing the
//! augmented value from scratch.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::flowcap::SlotSet;
use crate::network::Route;
use crate::preferences::{eta, xi, Agent, MarketCosts, PrefError};
use crate::AgentId;

#[derive(Debug, Error)]
pub enum AuctionError {
    #[error(transparent)]
    Pref(#[from] PrefError),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("auction exceeded its round cap of {0}; this is a defect")]
    RoundCapExceeded(u64),
}

/// Per-slot auction state.
#[derive(Debug, Clone)]
pub struct SlotState {
    pub route: usize,
    pub z: u32,
    /// Assigned augmented group `b̄_l`.
    pub assigned: BTreeSet<AgentId>,
    /// Representative group `h̄_l ⊆ b̄_l` (at most the vehicle capacity).
    pub representative: BTreeSet<AgentId>,
    /// `eta` of the marginal (minimum-eta) representative member; 0 if empty.
    pub lambda: f64,
    /// Slot surplus: augmented value of `b̄_l` minus its members' utilities.
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct AuctionOutcome {
    pub slots: Vec<SlotState>,
    pub utilities: BTreeMap<AgentId, f64>,
    pub epsilon: f64,
    pub rounds: u64,
}

impl AuctionOutcome {
    /// Welfare of the representative groups across slots.
    pub fn welfare(&self, routes: &[Route], agents: &[Agent], costs: &MarketCosts) -> f64 {
        self.slots
            .iter()
            .filter(|s| !s.representative.is_empty())
            .map(|s| {
                let members: Vec<&Agent> =
                    agents.iter().filter(|a| s.representative.contains(&a.id)).collect();
                crate::preferences::trip_value(s.z, routes[s.route].total_time, &members, costs)
                    .expect("capacity respected")
                    .expect("representative groups are feasible")
            })
            .sum()
    }
}

/// Eta values for one (route, departure) context, indexed by agent position.
struct EtaTable {
    by_agent: Vec<Option<f64>>,
}

fn eta_tables(slots: &SlotSet, routes: &[Route], agents: &[Agent]) -> BTreeMap<(usize, u32), EtaTable> {
    let mut out = BTreeMap::new();
    for s in &slots.slots {
        out.entry((s.route, s.z)).or_insert_with(|| EtaTable {
            by_agent: agents.iter().map(|a| eta(a, s.z, routes[s.route].total_time)).collect(),
        });
    }
    out
}

/// Representative-group recomputation from scratch: greedy selection by
/// descending eta with the convex xi steps; returns (members, lambda, value).
fn representative_of(
    pool: &BTreeSet<AgentId>,
    etas: &EtaTable,
    agents: &[Agent],
    d_r: f64,
    costs: &MarketCosts,
) -> (BTreeSet<AgentId>, f64, f64) {
    let mut order: Vec<(usize, f64)> = agents
        .iter()
        .enumerate()
        .filter(|(i, a)| pool.contains(&a.id) && etas.by_agent[*i].is_some())
        .map(|(i, _)| (i, etas.by_agent[i].unwrap()))
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| agents[a.0].id.cmp(&agents[b.0].id)));
    let (pi, gamma) = match pool.iter().next() {
        Some(id) => {
            let a = agents.iter().find(|a| a.id == *id).unwrap();
            (&a.pi, &a.gamma)
        }
        None => return (BTreeSet::new(), 0.0, 0.0),
    };
    let mut chosen = BTreeSet::new();
    let mut lambda = 0.0;
    let mut eta_sum = 0.0;
    let mut n = 0u32;
    for (i, eta_i) in order {
        let step = match (xi(n + 1, d_r, pi, gamma, costs), xi(n, d_r, pi, gamma, costs)) {
            (Some(next), Some(cur)) => next - cur,
            _ => break,
        };
        if eta_i < step {
            break;
        }
        n += 1;
        chosen.insert(agents[i].id);
        eta_sum += eta_i;
        lambda = eta_i;
    }
    let value = if n == 0 { 0.0 } else { eta_sum - xi(n, d_r, pi, gamma, costs).unwrap() };
    (chosen, lambda, value)
}

/// Result of the per-slot demand computation.
#[derive(Debug, Clone)]
pub struct JlResult {
    pub j: Vec<AgentId>,
    pub representative: BTreeSet<AgentId>,
    pub lambda: f64,
    pub phi: f64,
}

/// Greedy demand update for one slot: scan candidates outside the assigned
/// pool in descending `eta - u` order and tentatively admit while the slot
/// surplus strictly improves. Within one state all profitable candidates
/// share the same surplus shift, so a single sorted pass realizes the greedy
/// argmax. The displaced member in the eviction case is the minimum-eta
/// representative (largest id among ties), and `lambda` is re-derived from
/// the updated representative set rather than trusting the candidate's eta.
#[allow(clippy::too_many_arguments)]
pub fn compute_jl(
    state: &SlotState,
    etas: &EtaTable,
    agents: &[Agent],
    d_r: f64,
    costs: &MarketCosts,
    utilities: &BTreeMap<AgentId, f64>,
    epsilon: f64,
) -> JlResult {
    let (pi, gamma) = (&agents[0].pi, &agents[0].gamma);
    let mut candidates: Vec<(usize, f64, f64)> = agents
        .iter()
        .enumerate()
        .filter(|(i, a)| !state.assigned.contains(&a.id) && etas.by_agent[*i].is_some())
        .map(|(i, a)| {
            let e = etas.by_agent[i].unwrap();
            (i, e, e - utilities[&a.id])
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2).unwrap().then_with(|| agents[a.0].id.cmp(&agents[b.0].id))
    });

    let mut h = state.representative.clone();
    let mut lambda = state.lambda;
    let mut phi = state.phi;
    let mut j = Vec::new();
    for (idx, eta_j, _) in candidates {
        let n = h.len() as u32;
        let step = match (xi(n + 1, d_r, pi, gamma, costs), xi(n, d_r, pi, gamma, costs)) {
            (Some(next), Some(cur)) => Some(next - cur),
            _ => None, // capacity exhausted: only displacement can apply
        };
        let u_j = utilities[&agents[idx].id];
        let (phi2, action) = if h.is_empty() {
            match step {
                Some(s) if eta_j >= s => (phi + eta_j - s - u_j - epsilon, Action::Join),
                _ => (phi - u_j - epsilon, Action::Pad),
            }
        } else {
            match step {
                Some(s) if eta_j >= lambda && lambda >= s => {
                    (phi + eta_j - s - u_j - epsilon, Action::Join)
                }
                Some(s) if lambda >= eta_j && eta_j >= s => {
                    (phi + eta_j - s - u_j - epsilon, Action::Join)
                }
                Some(s) if eta_j >= lambda && s >= lambda => {
                    (phi + eta_j - lambda - u_j - epsilon, Action::Displace)
                }
                None if eta_j >= lambda => {
                    (phi + eta_j - lambda - u_j - epsilon, Action::Displace)
                }
                _ => (phi - u_j - epsilon, Action::Pad),
            }
        };
        if phi2 <= phi + 1e-12 {
            break;
        }
        match action {
            Action::Join => {
                h.insert(agents[idx].id);
            }
            Action::Displace => {
                // Evict the minimum-eta member, breaking ties toward the
                // largest agent id (the member added last).
                let evict = h
                    .iter()
                    .map(|id| {
                        let i = agents.iter().position(|a| a.id == *id).unwrap();
                        (*id, etas.by_agent[i].unwrap())
                    })
                    .min_by(|a, b| {
                        a.1.partial_cmp(&b.1).unwrap().then_with(|| b.0.cmp(&a.0))
                    })
                    .map(|(id, _)| id)
                    .expect("nonempty representative");
                h.remove(&evict);
                h.insert(agents[idx].id);
            }
            Action::Pad => unreachable!("pads never improve phi"),
        }
        lambda = h
            .iter()
            .map(|id| {
                let i = agents.iter().position(|a| a.id == *id).unwrap();
                etas.by_agent[i].unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        phi = phi2;
        j.push(agents[idx].id);
    }
    JlResult { j, representative: h, lambda, phi }
}

enum Action {
    Join,
    Displace,
    Pad,
}

/// Surplus-maximizing demand of one (route, departure) buyer at the given
/// agent prices: `max over pools of [augmented value - total price]`, exact
/// under homogeneous disutilities. Returns the maximizing group and its
/// surplus (both empty/zero when no pool is profitable).
pub fn greedy_demand(
    z: u32,
    route: usize,
    routes: &[Route],
    agents: &[Agent],
    costs: &MarketCosts,
    prices: &BTreeMap<AgentId, f64>,
) -> (f64, BTreeSet<AgentId>) {
    if agents.is_empty() {
        return (0.0, BTreeSet::new());
    }
    let d_r = routes[route].total_time;
    let table = EtaTable { by_agent: agents.iter().map(|a| eta(a, z, d_r)).collect() };
    let empty = SlotState {
        route,
        z,
        assigned: BTreeSet::new(),
        representative: BTreeSet::new(),
        lambda: 0.0,
        phi: 0.0,
    };
    let jl = compute_jl(&empty, &table, agents, d_r, costs, prices, 0.0);
    (jl.phi.max(0.0), jl.representative)
}

/// Run the ascending auction. All agents must share identical pooling
/// disutility tables; `epsilon` is the bid increment.
pub fn allocate(
    slots: &SlotSet,
    routes: &[Route],
    agents: &[Agent],
    costs: &MarketCosts,
    epsilon: f64,
) -> Result<AuctionOutcome, AuctionError> {
    if !(epsilon > 0.0) {
        return Err(AuctionError::NonPositiveEpsilon);
    }
    for w in agents.windows(2) {
        if !w[0].same_disutility(&w[1]) {
            return Err(PrefError::HeterogeneousDisutility { a: w[0].id, b: w[1].id }.into());
        }
    }
    let etas = eta_tables(slots, routes, agents);
    let mut states: Vec<SlotState> = slots
        .slots
        .iter()
        .map(|s| SlotState {
            route: s.route,
            z: s.z,
            assigned: BTreeSet::new(),
            representative: BTreeSet::new(),
            lambda: 0.0,
            phi: 0.0,
        })
        .collect();
    let mut utilities: BTreeMap<AgentId, f64> = agents.iter().map(|a| (a.id, 0.0)).collect();

    let v_max = agents.iter().map(|a| a.alpha.abs()).fold(1.0f64, f64::max);
    let round_cap = ((agents.len().max(1) as f64) * v_max / epsilon).ceil() as u64 * 4 + 1000;
    let mut rounds = 0u64;
    if agents.is_empty() || states.is_empty() {
        return Ok(AuctionOutcome { slots: states, utilities, epsilon, rounds });
    }

    loop {
        // Recompute each slot's representative state from scratch, then its
        // greedy demand.
        let mut pending: Option<(usize, JlResult)> = None;
        for (li, st) in states.iter_mut().enumerate() {
            let table = &etas[&(st.route, st.z)];
            let d_r = routes[st.route].total_time;
            let (h, lambda, value) = representative_of(&st.assigned, table, agents, d_r, costs);
            let pool_u: f64 = st.assigned.iter().map(|id| utilities[id]).sum();
            st.representative = h;
            st.lambda = lambda;
            st.phi = value - pool_u;
            if pending.is_none() {
                let jl = compute_jl(st, table, agents, d_r, costs, &utilities, epsilon);
                if !jl.j.is_empty() {
                    pending = Some((li, jl));
                }
            }
        }
        let Some((l_hat, jl)) = pending else {
            break;
        };
        debug_assert!({
            // The incremental phi must match a from-scratch recomputation of
            // the tentative pool.
            let st = &states[l_hat];
            let mut pool = st.assigned.clone();
            pool.extend(jl.j.iter().copied());
            let d_r = routes[st.route].total_time;
            let (h2, _, value) =
                representative_of(&pool, &etas[&(st.route, st.z)], agents, d_r, costs);
            let u_sum: f64 = st.assigned.iter().map(|id| utilities[id]).sum::<f64>()
                + jl.j.iter().map(|id| utilities[id] + epsilon).sum::<f64>();
            (jl.phi - (value - u_sum)).abs() < 1e-7 && h2 == jl.representative
        });
        for (li, st) in states.iter_mut().enumerate() {
            if li == l_hat {
                st.assigned.extend(jl.j.iter().copied());
            } else {
                for id in &jl.j {
                    st.assigned.remove(id);
                }
            }
        }
        for id in &jl.j {
            *utilities.get_mut(id).unwrap() += epsilon;
        }
        rounds += 1;
        if rounds > round_cap {
            return Err(AuctionError::RoundCapExceeded(round_cap));
        }
    }
    // Final from-scratch refresh of the reported state.
    for st in states.iter_mut() {
        let table = &etas[&(st.route, st.z)];
        let d_r = routes[st.route].total_time;
        let (h, lambda, value) = representative_of(&st.assigned, table, agents, d_r, costs);
        let pool_u: f64 = st.assigned.iter().map(|id| utilities[id]).sum();
        st.representative = h;
        st.lambda = lambda;
        st.phi = value - pool_u;
    }
    Ok(AuctionOutcome { slots: states, utilities, epsilon, rounds })
}

/// Walrasian verification report.
#[derive(Debug, Clone, Default)]
pub struct WalrasianReport {
    /// Slots whose assigned bundle is not surplus-maximizing, with the gap.
    pub demand_violations: Vec<(usize, f64)>,
    /// Agents outside every assigned bundle that carry positive utility.
    pub unassigned_nonzero: Vec<AgentId>,
}

impl WalrasianReport {
    pub fn pass(&self) -> bool {
        self.demand_violations.is_empty() && self.unassigned_nonzero.is_empty()
    }
}

/// Check the two Walrasian conditions: every slot's assigned bundle is
/// within `eps |M|` of its surplus-maximizing demand (exhaustive over all
/// agent subsets), and agents in no bundle have zero utility.
pub fn verify_walrasian(
    outcome: &AuctionOutcome,
    routes: &[Route],
    agents: &[Agent],
    costs: &MarketCosts,
) -> WalrasianReport {
    let tol = outcome.epsilon * agents.len() as f64 + 1e-9;
    let mut report = WalrasianReport::default();
    let n = agents.len();
    assert!(n <= 10, "exhaustive Walrasian check is capped at 10 agents");
    for (li, st) in outcome.slots.iter().enumerate() {
        let d_r = routes[st.route].total_time;
        let held: Vec<&Agent> = agents.iter().filter(|a| st.assigned.contains(&a.id)).collect();
        let held_value = crate::preferences::augmented_value(st.z, d_r, &held, costs)
            .expect("homogeneous")
            .value;
        let held_u: f64 = st.assigned.iter().map(|id| outcome.utilities[id]).sum();
        let held_surplus = held_value - held_u;
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let pool: Vec<&Agent> =
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &agents[i]).collect();
            let value =
                crate::preferences::augmented_value(st.z, d_r, &pool, costs).expect("homogeneous").value;
            let u: f64 = pool.iter().map(|a| outcome.utilities[&a.id]).sum();
            best = best.max(value - u);
        }
        if held_surplus < best - tol {
            report.demand_violations.push((li, best - held_surplus));
        }
    }
    let assigned_anywhere: BTreeSet<AgentId> =
        outcome.slots.iter().flat_map(|s| s.assigned.iter().copied()).collect();
    for a in agents {
        if !assigned_anywhere.contains(&a.id) && outcome.utilities[&a.id] > tol {
            report.unassigned_nonzero.push(a.id);
        }
    }
    report
}
