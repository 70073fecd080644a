//! Two-terminal directed network model: validation, series-parallel
//! recognition, route enumeration and per-route timing queries.
//!
//! Networks are immutable after validation and all operations here are pure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

use crate::TIME_TOL;

/// Directed edge with an integer per-time-step capacity and a real travel
/// time. Travel times may be fractional; departure times are integer ticks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub capacity: u32,
    pub travel_time: f64,
}

/// Unvalidated network description as parsed from an instance file.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RawNetwork {
    pub edges: Vec<Edge>,
    pub origin: String,
    pub destination: String,
    /// Time horizon `T`; departures happen at integer ticks `1..=T`.
    pub horizon: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("edge {0}: capacity must be a positive integer")]
    NonPositiveCapacity(String),
    #[error("edge {0}: travel time must be positive")]
    NonPositiveTravelTime(String),
    #[error("no origin-destination path{0}")]
    Disconnected(String),
    #[error("directed cycle among used edges{0}")]
    CycleDetected(String),
    #[error("duplicate edge id {0}")]
    DuplicateEdgeId(String),
    #[error("bad terminals: {0}")]
    BadTerminals(String),
    #[error("route count exceeds cap of {0}")]
    RouteExplosion(usize),
}

/// Validated two-terminal network. Edges not lying on any origin-destination
/// path have been pruned; the used subgraph is acyclic.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub edges: Vec<Edge>,
    pub origin: String,
    pub destination: String,
    pub horizon: u32,
    /// Edge ids dropped by reachability pruning, for reporting.
    pub pruned: Vec<String>,
}

/// A simple origin-destination path.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Indices into `Network::edges`, in traversal order.
    pub edges: Vec<usize>,
    /// Total travel time `d_r`.
    pub total_time: f64,
    /// `d_{r,e}`: time from the origin to the beginning of each edge.
    pub prefix_times: Vec<f64>,
}

impl Route {
    /// Integer tick at which a trip departing at `z` enters the `pos`-th edge
    /// of this route. Fractional entry times are charged to the next integer
    /// tick, matching the discretization used for capacity counting and
    /// pricing throughout the solver.
    pub fn entry_tick(&self, z: u32, pos: usize) -> u32 {
        entry_tick(z, self.prefix_times[pos])
    }

    pub fn label(&self, net: &Network) -> String {
        self.edges.iter().map(|&e| net.edges[e].id.as_str()).collect::<Vec<_>>().join("-")
    }
}

/// Tick at which an edge reached `prefix` time units after an integer
/// departure `z` is entered.
pub fn entry_tick(z: u32, prefix: f64) -> u32 {
    (z as f64 + prefix - TIME_TOL).ceil() as u32
}

/// Whether a departure at `z` on a route of length `d_r` completes by `t`.
pub fn arrives_by(z: u32, d_r: f64, t: f64) -> bool {
    z as f64 + d_r <= t + TIME_TOL
}

impl Network {
    /// Validate a raw description: positive capacities and travel times, no
    /// self loops, unique ids, origin-destination connectivity, acyclic used
    /// subgraph. Unreachable edges are pruned rather than rejected.
    pub fn validate(raw: &RawNetwork) -> Result<Network, NetworkError> {
        if raw.origin == raw.destination {
            return Err(NetworkError::BadTerminals("origin equals destination".into()));
        }
        if raw.horizon == 0 {
            return Err(NetworkError::BadTerminals("horizon must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &raw.edges {
            if !seen.insert(&e.id) {
                return Err(NetworkError::DuplicateEdgeId(e.id.clone()));
            }
            if e.capacity == 0 {
                return Err(NetworkError::NonPositiveCapacity(e.id.clone()));
            }
            if !(e.travel_time > 0.0) || !e.travel_time.is_finite() {
                return Err(NetworkError::NonPositiveTravelTime(e.id.clone()));
            }
            if e.tail == e.head {
                return Err(NetworkError::CycleDetected(format!(" (self loop {})", e.id)));
            }
        }
        let kept = prune_to_pairs(&raw.edges, &[(raw.origin.clone(), raw.destination.clone())]);
        let mut edges = Vec::new();
        let mut pruned = Vec::new();
        for (i, e) in raw.edges.iter().enumerate() {
            if kept.contains(&i) {
                edges.push(e.clone());
            } else {
                pruned.push(e.id.clone());
            }
        }
        if edges.is_empty() || !reaches(&edges, &raw.origin, &raw.destination) {
            return Err(NetworkError::Disconnected(String::new()));
        }
        check_acyclic(&edges)?;
        Ok(Network {
            edges,
            origin: raw.origin.clone(),
            destination: raw.destination.clone(),
            horizon: raw.horizon,
            pruned,
        })
    }

    /// All simple origin-destination paths, sorted ascending by travel time
    /// with ties broken by the lexicographic edge-id sequence. Deterministic.
    pub fn enumerate_routes(&self) -> Result<Vec<Route>, NetworkError> {
        self.enumerate_routes_capped(DEFAULT_ROUTE_CAP)
    }

    pub fn enumerate_routes_capped(&self, cap: usize) -> Result<Vec<Route>, NetworkError> {
        enumerate_routes_between(&self.edges, &self.origin, &self.destination, cap)
    }

    /// Series-parallel recognition by exhaustive series/parallel reductions.
    pub fn is_series_parallel(&self) -> SpCertificate {
        recognize_sp(&self.edges, &self.origin, &self.destination)
    }
}

pub const DEFAULT_ROUTE_CAP: usize = 10_000;

/// Edges lying on some o->d walk for at least one of the given pairs
/// (tail forward-reachable from o, head backward-reachable from d).
pub fn prune_to_pairs(edges: &[Edge], pairs: &[(String, String)]) -> BTreeSet<usize> {
    let mut kept = BTreeSet::new();
    for (o, d) in pairs {
        let fwd = reachable_from(edges, o, true);
        let bwd = reachable_from(edges, d, false);
        for (i, e) in edges.iter().enumerate() {
            if fwd.contains(&e.tail) && bwd.contains(&e.head) {
                kept.insert(i);
            }
        }
    }
    kept
}

fn reachable_from(edges: &[Edge], start: &str, forward: bool) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    seen.insert(start.to_string());
    let mut stack = vec![start.to_string()];
    while let Some(v) = stack.pop() {
        for e in edges {
            let (from, to) = if forward { (&e.tail, &e.head) } else { (&e.head, &e.tail) };
            if *from == v && !seen.contains(to) {
                seen.insert(to.clone());
                stack.push(to.clone());
            }
        }
    }
    seen
}

fn reaches(edges: &[Edge], o: &str, d: &str) -> bool {
    reachable_from(edges, o, true).contains(d)
}

fn check_acyclic(edges: &[Edge]) -> Result<(), NetworkError> {
    let mut nodes: BTreeSet<&str> = BTreeSet::new();
    for e in edges {
        nodes.insert(&e.tail);
        nodes.insert(&e.head);
    }
    let mut indeg: BTreeMap<&str, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    for e in edges {
        *indeg.get_mut(e.head.as_str()).unwrap() += 1;
    }
    let mut queue: Vec<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut removed = 0;
    while let Some(v) = queue.pop() {
        removed += 1;
        for e in edges {
            if e.tail == v {
                let d = indeg.get_mut(e.head.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(&e.head);
                }
            }
        }
    }
    if removed != nodes.len() {
        return Err(NetworkError::CycleDetected(String::new()));
    }
    Ok(())
}

/// Simple paths from `o` to `d`, sorted by (total time, lexicographic edge-id
/// sequence).
pub fn enumerate_routes_between(
    edges: &[Edge],
    o: &str,
    d: &str,
    cap: usize,
) -> Result<Vec<Route>, NetworkError> {
    let mut out_edges: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        out_edges.entry(e.tail.as_str()).or_default().push(i);
    }
    for v in out_edges.values_mut() {
        v.sort_by(|&a, &b| edges[a].id.cmp(&edges[b].id));
    }
    let mut routes = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    let mut visited: BTreeSet<&str> = BTreeSet::new();
    visited.insert(o);
    dfs_paths(edges, &out_edges, o, d, &mut path, &mut visited, &mut routes, cap)?;
    let mut built: Vec<Route> = routes
        .into_iter()
        .map(|path| {
            let mut prefix_times = Vec::with_capacity(path.len());
            let mut acc = 0.0;
            for &e in &path {
                prefix_times.push(acc);
                acc += edges[e].travel_time;
            }
            Route { edges: path, total_time: acc, prefix_times }
        })
        .collect();
    built.sort_by(|a, b| {
        a.total_time
            .partial_cmp(&b.total_time)
            .unwrap()
            .then_with(|| id_seq(edges, a).cmp(&id_seq(edges, b)))
    });
    Ok(built)
}

fn id_seq<'a>(edges: &'a [Edge], r: &Route) -> Vec<&'a str> {
    r.edges.iter().map(|&e| edges[e].id.as_str()).collect()
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths<'a>(
    edges: &'a [Edge],
    out_edges: &HashMap<&str, Vec<usize>>,
    at: &'a str,
    d: &str,
    path: &mut Vec<usize>,
    visited: &mut BTreeSet<&'a str>,
    routes: &mut Vec<Vec<usize>>,
    cap: usize,
) -> Result<(), NetworkError> {
    if at == d {
        if routes.len() >= cap {
            return Err(NetworkError::RouteExplosion(cap));
        }
        routes.push(path.clone());
        return Ok(());
    }
    if let Some(outs) = out_edges.get(at) {
        for &i in outs {
            let head = edges[i].head.as_str();
            if visited.contains(head) {
                continue;
            }
            visited.insert(head);
            path.push(i);
            dfs_paths(edges, out_edges, head, d, path, visited, routes, cap)?;
            path.pop();
            visited.remove(head);
        }
    }
    Ok(())
}

/// Series/parallel decomposition tree over edge ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpTree {
    Edge(String),
    Series(Box<SpTree>, Box<SpTree>),
    Parallel(Box<SpTree>, Box<SpTree>),
}

impl SpTree {
    pub fn leaves(&self, out: &mut Vec<String>) {
        match self {
            SpTree::Edge(id) => out.push(id.clone()),
            SpTree::Series(a, b) | SpTree::Parallel(a, b) => {
                a.leaves(out);
                b.leaves(out);
            }
        }
    }
}

impl std::fmt::Display for SpTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpTree::Edge(id) => write!(f, "{id}"),
            SpTree::Series(a, b) => write!(f, "S({a}, {b})"),
            SpTree::Parallel(a, b) => write!(f, "P({a}, {b})"),
        }
    }
}

/// Result of series-parallel recognition: either a decomposition tree, or an
/// embedded-wheatstone witness (original edge ids).
#[derive(Debug, Clone)]
pub struct SpCertificate {
    pub is_sp: bool,
    pub decomposition: Option<SpTree>,
    pub witness: Vec<String>,
}

struct RedEdge {
    tail: String,
    head: String,
    tree: SpTree,
    min_id: String,
}

fn rebuild_without(work: Vec<RedEdge>, drop: &[usize], combined: RedEdge) -> Vec<RedEdge> {
    let mut next: Vec<RedEdge> = work
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, e)| e)
        .collect();
    next.push(combined);
    next
}

/// Exhaustive series-contraction / parallel-merge reduction. The reduction
/// system is confluent, so any maximal sequence decides membership.
fn recognize_sp(edges: &[Edge], origin: &str, destination: &str) -> SpCertificate {
    let mut work: Vec<RedEdge> = edges
        .iter()
        .map(|e| RedEdge {
            tail: e.tail.clone(),
            head: e.head.clone(),
            tree: SpTree::Edge(e.id.clone()),
            min_id: e.id.clone(),
        })
        .collect();
    loop {
        // Parallel merges first: group by (tail, head), fold in id order.
        let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, e) in work.iter().enumerate() {
            groups.entry((e.tail.clone(), e.head.clone())).or_default().push(i);
        }
        let merge_group = groups.into_values().find(|idxs| idxs.len() >= 2);
        if let Some(mut idxs) = merge_group {
            idxs.sort_by(|&a, &b| work[a].min_id.cmp(&work[b].min_id));
            let first = idxs[0];
            let mut tree = work[first].tree.clone();
            for &i in &idxs[1..] {
                tree = SpTree::Parallel(Box::new(tree), Box::new(work[i].tree.clone()));
            }
            let combined = RedEdge {
                tail: work[first].tail.clone(),
                head: work[first].head.clone(),
                tree,
                min_id: work[first].min_id.clone(),
            };
            work = rebuild_without(work, &idxs, combined);
            continue;
        }
        // One series contraction at the smallest-named eligible node.
        let mut by_node: BTreeMap<String, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, e) in work.iter().enumerate() {
            by_node.entry(e.head.clone()).or_default().0.push(i);
            by_node.entry(e.tail.clone()).or_default().1.push(i);
        }
        let mut contracted = false;
        for (node, (ins, outs)) in &by_node {
            if node == origin || node == destination {
                continue;
            }
            if ins.len() == 1 && outs.len() == 1 {
                let (i, o) = (ins[0], outs[0]);
                let combined = RedEdge {
                    tail: work[i].tail.clone(),
                    head: work[o].head.clone(),
                    tree: SpTree::Series(Box::new(work[i].tree.clone()), Box::new(work[o].tree.clone())),
                    min_id: work[i].min_id.clone().min(work[o].min_id.clone()),
                };
                work = rebuild_without(work, &[i, o], combined);
                contracted = true;
                break;
            }
        }
        if !contracted {
            break;
        }
    }
    if work.len() == 1 && work[0].tail == origin && work[0].head == destination {
        return SpCertificate { is_sp: true, decomposition: Some(work[0].tree.clone()), witness: Vec::new() };
    }
    // Irreducible: extract an embedded wheatstone from the reduced graph and
    // map it back to original edge ids.
    let reduced: Vec<(String, String, Vec<String>)> = work
        .iter()
        .map(|e| {
            let mut leaves = Vec::new();
            e.tree.leaves(&mut leaves);
            (e.tail.clone(), e.head.clone(), leaves)
        })
        .collect();
    let witness = find_wheatstone(&reduced).unwrap_or_else(|| {
        let mut all: Vec<String> = reduced.iter().flat_map(|(_, _, ids)| ids.clone()).collect();
        all.sort();
        all
    });
    SpCertificate { is_sp: false, decomposition: None, witness }
}

/// Search the reduced multigraph for a wheatstone embedding: distinct nodes
/// (w, x, y, z) and five pairwise internally-disjoint directed paths
/// w->x, x->z, w->y, y->z, x->y. Returns the original edge ids involved.
fn find_wheatstone(reduced: &[(String, String, Vec<String>)]) -> Option<Vec<String>> {
    let mut nodes: Vec<String> = reduced
        .iter()
        .flat_map(|(t, h, _)| [t.clone(), h.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    nodes.sort();
    let n = nodes.len();
    for w in 0..n {
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if w == x || w == y || w == z || x == y || x == z || y == z {
                        continue;
                    }
                    let want = [
                        (&nodes[w], &nodes[x]),
                        (&nodes[x], &nodes[z]),
                        (&nodes[w], &nodes[y]),
                        (&nodes[y], &nodes[z]),
                        (&nodes[x], &nodes[y]),
                    ];
                    if let Some(edge_sets) = disjoint_paths(reduced, &want) {
                        let mut ids: Vec<String> = edge_sets
                            .into_iter()
                            .flat_map(|set| set.into_iter().flat_map(|ei| reduced[ei].2.clone()))
                            .collect();
                        ids.sort();
                        ids.dedup();
                        return Some(ids);
                    }
                }
            }
        }
    }
    None
}

/// Find pairwise internally-node-disjoint (and edge-disjoint) simple paths
/// for the given terminal pairs, by backtracking over path choices.
fn disjoint_paths(
    reduced: &[(String, String, Vec<String>)],
    want: &[(&String, &String); 5],
) -> Option<Vec<Vec<usize>>> {
    const PATHS_CAP: usize = 400;
    let mut per_pair: Vec<Vec<(Vec<usize>, BTreeSet<String>)>> = Vec::new();
    let terminals: BTreeSet<&String> =
        want.iter().flat_map(|(a, b)| [*a, *b]).collect();
    for (from, to) in want {
        let mut found = Vec::new();
        let mut path = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        seen.insert((*from).clone());
        simple_paths_rec(reduced, from, to, &mut path, &mut seen, &mut found, PATHS_CAP);
        if found.is_empty() {
            return None;
        }
        let enriched = found
            .into_iter()
            .map(|p| {
                let mut internal: BTreeSet<String> = BTreeSet::new();
                for &ei in &p {
                    for node in [&reduced[ei].0, &reduced[ei].1] {
                        if !terminals.contains(node) {
                            internal.insert(node.clone());
                        }
                    }
                }
                (p, internal)
            })
            .collect();
        per_pair.push(enriched);
    }
    fn assign(
        per_pair: &[Vec<(Vec<usize>, BTreeSet<String>)>],
        k: usize,
        used_edges: &mut BTreeSet<usize>,
        used_internal: &mut BTreeSet<String>,
        chosen: &mut Vec<Vec<usize>>,
        budget: &mut usize,
    ) -> bool {
        if k == per_pair.len() {
            return true;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        for (p, internal) in &per_pair[k] {
            if p.iter().any(|e| used_edges.contains(e)) {
                continue;
            }
            if internal.iter().any(|v| used_internal.contains(v)) {
                continue;
            }
            for &e in p {
                used_edges.insert(e);
            }
            for v in internal {
                used_internal.insert(v.clone());
            }
            chosen.push(p.clone());
            if assign(per_pair, k + 1, used_edges, used_internal, chosen, budget) {
                return true;
            }
            chosen.pop();
            for &e in p {
                used_edges.remove(&e);
            }
            for v in internal {
                used_internal.remove(v);
            }
        }
        false
    }
    let mut chosen = Vec::new();
    let mut budget = 500_000usize;
    if assign(&per_pair, 0, &mut BTreeSet::new(), &mut BTreeSet::new(), &mut chosen, &mut budget) {
        Some(chosen)
    } else {
        None
    }
}

fn simple_paths_rec(
    reduced: &[(String, String, Vec<String>)],
    at: &String,
    to: &String,
    path: &mut Vec<usize>,
    seen: &mut BTreeSet<String>,
    found: &mut Vec<Vec<usize>>,
    cap: usize,
) {
    if found.len() >= cap {
        return;
    }
    if at == to && !path.is_empty() {
        found.push(path.clone());
        return;
    }
    for (i, (tail, head, _)) in reduced.iter().enumerate() {
        if tail == at && !seen.contains(head) {
            seen.insert(head.clone());
            path.push(i);
            simple_paths_rec(reduced, head, to, path, seen, found, cap);
            path.pop();
            seen.remove(head);
        }
    }
}
