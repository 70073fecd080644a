//! Step 1 of the equilibrium computation: greedy static route capacities and
//! the temporally repeated flow that defines auction slots.
//!
//! On series-parallel networks the temporally repeated flow is an earliest
//! arrival flow; on general networks the capacities are still emitted but no
//! optimality is claimed, so callers gate on [`crate::network::Network::is_series_parallel`]
//! for equilibrium guarantees.

use crate::network::{arrives_by, Network, Route};

/// Static capacity `w*_r` assigned to each route, aligned with the route list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteCapacity {
    pub w: Vec<u32>,
}

/// One unit of route capacity at one departure time; the "buyer" in the
/// auxiliary economy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub route: usize,
    pub z: u32,
    /// Copy index within `(route, z)`, `0..w*_r`.
    pub copy: u32,
}

/// All slots induced by a route-capacity vector, in deterministic order
/// (route-list order, then departure time, then copy index).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotSet {
    pub slots: Vec<Slot>,
}

impl SlotSet {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of slots (i.e. `k^{z*}_r`) at a given (route, departure).
    pub fn count_at(&self, route: usize, z: u32) -> u32 {
        self.slots.iter().filter(|s| s.route == route && s.z == z).count() as u32
    }
}

/// Greedy static route capacity: repeatedly take the shortest route whose
/// edges all have residual capacity, assign it the bottleneck residual, and
/// decrement. Routes are scanned in the deterministic enumeration order
/// (travel time, then lexicographic edge ids), which realizes the shortest
/// route in the residual network together with the tie rule. Each iteration
/// exhausts at least one edge, so there are at most |E| iterations.
pub fn greedy_route_capacity(net: &Network, routes: &[Route]) -> RouteCapacity {
    let mut residual: Vec<u32> = net.edges.iter().map(|e| e.capacity).collect();
    let mut w = vec![0u32; routes.len()];
    loop {
        let alive = |r: &Route| r.edges.iter().all(|&e| residual[e] > 0);
        let Some(idx) = routes.iter().position(alive) else { break };
        let bottleneck = routes[idx].edges.iter().map(|&e| residual[e]).min().unwrap();
        w[idx] += bottleneck;
        for &e in &routes[idx].edges {
            residual[e] -= bottleneck;
        }
    }
    RouteCapacity { w }
}

/// Temporally repeated flow: `w*_r` slots for every feasible departure
/// `z + d_r <= T` of every positive-capacity route.
pub fn temporally_repeated(w: &RouteCapacity, routes: &[Route], horizon: u32) -> SlotSet {
    let mut slots = Vec::new();
    for (ri, route) in routes.iter().enumerate() {
        if w.w[ri] == 0 {
            continue;
        }
        for z in 1..=horizon {
            if !arrives_by(z, route.total_time, horizon as f64) {
                continue;
            }
            for copy in 0..w.w[ri] {
                slots.push(Slot { route: ri, z, copy });
            }
        }
    }
    SlotSet { slots }
}

/// Number of vehicles the temporally repeated flow delivers to the
/// destination on or before time `t`.
pub fn arrival_profile(w: &RouteCapacity, routes: &[Route], t: u32) -> u64 {
    let mut total = 0u64;
    for (ri, route) in routes.iter().enumerate() {
        if w.w[ri] == 0 {
            continue;
        }
        let departures = (1..=t).filter(|&z| arrives_by(z, route.total_time, t as f64)).count();
        total += w.w[ri] as u64 * departures as u64;
    }
    total
}
