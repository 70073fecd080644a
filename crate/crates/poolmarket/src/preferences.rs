//! Agent preference model: per-agent trip values, total trip values, and the
//! augmented value function with representative-group extraction.
//!
//! Infinite disutilities and delays are a distinguished `Infeasible` sentinel
//! (`None`), absorbing under addition. A trip containing any infeasible term
//! is excluded from maximizations instead of carrying float infinities into
//! LP data.

use std::collections::BTreeSet;
use thiserror::Error;

use crate::{AgentId, TIME_TOL};

/// Money-or-infeasible. `None` marks a trip an agent cannot take.
pub type Value = Option<f64>;

/// Delay cost as a function of lateness.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DelayFn {
    /// `l(x) = slope * x`.
    Linear { slope: f64 },
    /// Any positive lateness is infeasible.
    HardDeadline,
    /// Piecewise-linear through `(0, 0)` and the given points, extrapolated
    /// beyond the last breakpoint at the final slope.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl DelayFn {
    pub fn eval(&self, lateness: f64) -> Value {
        if lateness <= TIME_TOL {
            return Some(0.0);
        }
        match self {
            DelayFn::Linear { slope } => Some(slope * lateness),
            DelayFn::HardDeadline => None,
            DelayFn::PiecewiseLinear { points } => {
                let mut prev = (0.0, 0.0);
                for &(x, y) in points {
                    if lateness <= x {
                        let w = (lateness - prev.0) / (x - prev.0);
                        return Some(prev.1 + w * (y - prev.1));
                    }
                    prev = (x, y);
                }
                // Extrapolate past the last breakpoint at the final slope.
                let (lx, ly) = prev;
                let slope = match points.len() {
                    0 => 0.0,
                    1 => ly / lx,
                    n => {
                        let (px, py) = points[n - 2];
                        (ly - py) / (lx - px)
                    }
                };
                Some(ly + slope * (lateness - lx))
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        if let DelayFn::PiecewiseLinear { points } = self {
            let mut prev = (0.0, 0.0);
            for &(x, y) in points {
                if x <= prev.0 {
                    return Err("piecewise delay breakpoints must be strictly increasing in lateness".into());
                }
                if y < prev.1 {
                    return Err("piecewise delay must be nondecreasing".into());
                }
                prev = (x, y);
            }
        }
        Ok(())
    }
}

/// Pooling-disutility table over group sizes `1..=len`. Entry `None` and any
/// size beyond the table are infeasible.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct DisutilityTable(pub Vec<Option<f64>>);

impl DisutilityTable {
    pub fn zero(up_to: u32) -> Self {
        DisutilityTable(vec![Some(0.0); up_to as usize])
    }

    /// Table value at group size `n >= 1`; `None` when infeasible.
    pub fn get(&self, n: u32) -> Value {
        self.0.get((n - 1) as usize).copied().flatten()
    }

    /// Nonnegative, zero at size 1, nondecreasing convex marginals, and
    /// infeasible entries absorbing (once infeasible, stays infeasible).
    fn validate(&self) -> Result<(), String> {
        if self.0.is_empty() {
            return Err("table must cover at least group size 1".into());
        }
        match self.0[0] {
            Some(v) if v.abs() <= 1e-12 => {}
            _ => return Err("disutility of a solo trip must be 0".into()),
        }
        let mut prev_marginal = f64::NEG_INFINITY;
        let mut prev: Option<f64> = self.0[0];
        for (i, entry) in self.0.iter().enumerate().skip(1) {
            match (prev, entry) {
                (Some(p), Some(v)) => {
                    if *v < -1e-12 {
                        return Err(format!("negative disutility at group size {}", i + 1));
                    }
                    let marginal = v - p;
                    if marginal < prev_marginal - 1e-9 {
                        return Err(format!("decreasing marginal disutility at group size {}", i + 1));
                    }
                    prev_marginal = marginal;
                }
                (None, Some(_)) => {
                    return Err(format!(
                        "infeasible entry at group size {} followed by a finite one",
                        i
                    ));
                }
                (_, None) => {}
            }
            prev = *entry;
        }
        Ok(())
    }
}

/// Agent preference parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Agent {
    pub id: AgentId,
    /// Value of arriving at the destination.
    pub alpha: f64,
    /// Value of time (money per time unit).
    pub beta: f64,
    /// Preferred latest arrival time.
    pub theta: f64,
    pub delay: DelayFn,
    pub pi: DisutilityTable,
    pub gamma: DisutilityTable,
}

impl Agent {
    pub fn validate(&self) -> Result<(), PrefError> {
        let wrap = |what: &str, msg: String| PrefError::InvalidAgent {
            agent: self.id,
            message: format!("{what}: {msg}"),
        };
        self.pi.validate().map_err(|m| wrap("pi", m))?;
        self.gamma.validate().map_err(|m| wrap("gamma", m))?;
        self.delay.validate().map_err(|m| wrap("delay", m))?;
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(wrap(name, "must be finite".into()));
            }
        }
        Ok(())
    }

    /// Same pooling-disutility tables?
    pub fn same_disutility(&self, other: &Agent) -> bool {
        self.pi == other.pi && self.gamma == other.gamma
    }
}

/// Per-seat trip cost parameters and the vehicle capacity `A`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarketCosts {
    pub sigma: f64,
    pub delta: f64,
    pub vehicle_capacity: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrefError {
    #[error("group size {size} exceeds vehicle capacity {cap}")]
    GroupTooLarge { size: u32, cap: u32 },
    #[error("agents {a} and {b} have different pooling-disutility tables")]
    HeterogeneousDisutility { a: AgentId, b: AgentId },
    #[error("agent {agent}: {message}")]
    InvalidAgent { agent: AgentId, message: String },
}

/// Lateness `(z + d_r - theta)_+` of a departure at `z` on a route of length
/// `d_r` for an agent with preferred arrival `theta`.
fn lateness(z: u32, d_r: f64, theta: f64) -> f64 {
    (z as f64 + d_r - theta).max(0.0)
}

/// Value of trip `(z, r)` to agent `m` when shared by `group_size` agents:
/// `alpha - beta d_r - pi(n) - gamma(n) d_r - l((z + d_r - theta)_+)`.
pub fn agent_trip_value(
    m: &Agent,
    z: u32,
    d_r: f64,
    group_size: u32,
    vehicle_capacity: u32,
) -> Result<Value, PrefError> {
    if group_size > vehicle_capacity {
        return Err(PrefError::GroupTooLarge { size: group_size, cap: vehicle_capacity });
    }
    let pi = m.pi.get(group_size);
    let gamma = m.gamma.get(group_size);
    let delay = m.delay.eval(lateness(z, d_r, m.theta));
    Ok(match (pi, gamma, delay) {
        (Some(pi), Some(gamma), Some(delay)) => {
            Some(m.alpha - m.beta * d_r - pi - gamma * d_r - delay)
        }
        _ => None,
    })
}

/// Total value of a trip: member values minus the cost `(sigma + delta d_r)|b|`.
pub fn trip_value(
    z: u32,
    d_r: f64,
    group: &[&Agent],
    costs: &MarketCosts,
) -> Result<Value, PrefError> {
    let n = group.len() as u32;
    if n > costs.vehicle_capacity {
        return Err(PrefError::GroupTooLarge { size: n, cap: costs.vehicle_capacity });
    }
    let mut total = 0.0;
    for m in group {
        match agent_trip_value(m, z, d_r, n, costs.vehicle_capacity)? {
            Some(v) => total += v,
            None => return Ok(None),
        }
    }
    Ok(Some(total - (costs.sigma + costs.delta * d_r) * n as f64))
}

/// `eta_{m,l} = alpha_m - beta_m d_r - l_m((z + d_r - theta_m)_+)`: the
/// size-independent part of an agent's value in slot `(z, r)`.
pub fn eta(m: &Agent, z: u32, d_r: f64) -> Value {
    m.delay.eval(lateness(z, d_r, m.theta)).map(|delay| m.alpha - m.beta * d_r - delay)
}

/// `xi(n) = (pi(n) + sigma) n + (gamma(n) + delta) n d_r`: the size-dependent
/// cost of carrying `n` agents. `xi(0) = 0`; infeasible above the vehicle
/// capacity or wherever the tables are infeasible.
pub fn xi(n: u32, d_r: f64, pi: &DisutilityTable, gamma: &DisutilityTable, costs: &MarketCosts) -> Value {
    if n == 0 {
        return Some(0.0);
    }
    if n > costs.vehicle_capacity {
        return None;
    }
    match (pi.get(n), gamma.get(n)) {
        (Some(p), Some(g)) => {
            Some((p + costs.sigma) * n as f64 + (g + costs.delta) * n as f64 * d_r)
        }
        _ => None,
    }
}

/// Result of the augmented value function: the maximum feasible-trip value
/// over subgroups, and the representative group attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub value: f64,
    pub representative: BTreeSet<AgentId>,
}

/// Members of `pool` sorted by descending `eta` (ties by ascending agent id),
/// with infeasible members dropped.
pub fn eta_order<'a>(pool: &[&'a Agent], z: u32, d_r: f64) -> Vec<(&'a Agent, f64)> {
    let mut order: Vec<(&Agent, f64)> = pool
        .iter()
        .filter_map(|m| eta(m, z, d_r).map(|v| (*m, v)))
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.id.cmp(&b.0.id)));
    order
}

/// Augmented trip value `V̄(z, r, pool)`: the best feasible trip value over
/// subgroups of `pool` (which may exceed the vehicle capacity), computed by
/// the greedy eta/xi decomposition. Requires homogeneous disutility tables
/// within the pool. An agent is admitted while its eta is at least the
/// marginal xi step; equality admits.
pub fn augmented_value(
    z: u32,
    d_r: f64,
    pool: &[&Agent],
    costs: &MarketCosts,
) -> Result<Augmented, PrefError> {
    if pool.is_empty() {
        return Ok(Augmented { value: 0.0, representative: BTreeSet::new() });
    }
    for m in &pool[1..] {
        if !m.same_disutility(pool[0]) {
            return Err(PrefError::HeterogeneousDisutility { a: pool[0].id, b: m.id });
        }
    }
    let pi = &pool[0].pi;
    let gamma = &pool[0].gamma;
    let order = eta_order(pool, z, d_r);
    let mut chosen: BTreeSet<AgentId> = BTreeSet::new();
    let mut eta_sum = 0.0;
    let mut best = Augmented { value: 0.0, representative: BTreeSet::new() };
    let mut n = 0u32;
    for (m, eta_m) in order {
        let step = match (xi(n + 1, d_r, pi, gamma, costs), xi(n, d_r, pi, gamma, costs)) {
            (Some(next), Some(cur)) => next - cur,
            _ => break, // capacity or table infeasibility: no further sizes
        };
        if eta_m < step {
            break;
        }
        n += 1;
        chosen.insert(m.id);
        eta_sum += eta_m;
        let value = eta_sum - xi(n, d_r, pi, gamma, costs).expect("xi finite for admitted size");
        best = Augmented { value, representative: chosen.clone() };
    }
    // The greedy admits only nonnegative-marginal members, so the final
    // prefix is the maximum; an empty group is worth exactly 0.
    if best.value < 0.0 {
        return Ok(Augmented { value: 0.0, representative: BTreeSet::new() });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn agent(id: AgentId, alpha: f64, beta: f64, theta: f64, delay: DelayFn) -> Agent {
        Agent {
            id,
            alpha,
            beta,
            theta,
            delay,
            pi: DisutilityTable::zero(8),
            gamma: DisutilityTable::zero(8),
        }
    }

    fn example1_agent(id: AgentId) -> Agent {
        let mut a = agent(id, 6.0, 1.0, 4.0, DelayFn::HardDeadline);
        a.pi = DisutilityTable::zero(2);
        a.gamma = DisutilityTable::zero(2);
        a
    }

    fn zero_costs(cap: u32) -> MarketCosts {
        MarketCosts { sigma: 0.0, delta: 0.0, vehicle_capacity: cap }
    }

    #[test]
    fn example1_solo_value_on_r2() {
        let m = example1_agent(1);
        let v = agent_trip_value(&m, 1, 2.2, 1, 2).unwrap().unwrap();
        assert!((v - 3.8).abs() < 1e-9);
    }

    #[test]
    fn all_zero_preferences_give_zero() {
        let m = agent(1, 0.0, 0.0, 10.0, DelayFn::Linear { slope: 1.0 });
        let v = agent_trip_value(&m, 1, 1.0, 1, 8).unwrap().unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn example2_low_class_value_in_group_of_six() {
        // Low-class agent of the two-parallel-edge fixture: alpha 50,
        // beta 1/6, pi(6) = 0.5 * 5 = 2.5, on time.
        let mut m = agent(1, 50.0, 1.0 / 6.0, 3.0, DelayFn::HardDeadline);
        m.pi = DisutilityTable(
            (1..=6).map(|n| Some(if n <= 5 { 0.25 } else { 0.5 } * (n - 1) as f64)).collect(),
        );
        m.gamma = DisutilityTable::zero(6);
        let v = agent_trip_value(&m, 1, 1.0, 6, 6).unwrap().unwrap();
        assert!((v - (50.0 - 1.0 / 6.0 - 2.5)).abs() < 1e-9);
    }

    #[test]
    fn group_too_large_rejected() {
        let m = example1_agent(1);
        assert_eq!(
            agent_trip_value(&m, 1, 2.2, 3, 2),
            Err(PrefError::GroupTooLarge { size: 3, cap: 2 })
        );
    }

    #[test]
    fn hard_deadline_is_infeasible_when_late() {
        let m = example1_agent(1);
        assert_eq!(agent_trip_value(&m, 2, 2.2, 1, 2).unwrap(), None);
    }

    #[test]
    fn example1_pair_trip_value() {
        let (a, b) = (example1_agent(1), example1_agent(2));
        let v = trip_value(1, 2.2, &[&a, &b], &zero_costs(2)).unwrap().unwrap();
        assert!((v - 7.6).abs() < 1e-9);
    }

    #[test]
    fn singleton_trip_value_equals_agent_value() {
        let m = example1_agent(1);
        let v = trip_value(1, 2.2, &[&m], &zero_costs(2)).unwrap().unwrap();
        let w = agent_trip_value(&m, 1, 2.2, 1, 2).unwrap().unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn trip_value_matches_termwise_recomputation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(1..=4usize);
            let agents: Vec<Agent> = (0..n)
                .map(|i| {
                    let mut a = agent(
                        i as AgentId,
                        rng.gen_range(0..20) as f64,
                        rng.gen_range(0..3) as f64,
                        rng.gen_range(1..6) as f64,
                        DelayFn::Linear { slope: rng.gen_range(0..3) as f64 },
                    );
                    a.pi = DisutilityTable((1..=4).map(|k| Some((k - 1) as f64 * 0.5)).collect());
                    a
                })
                .collect();
            let costs = MarketCosts {
                sigma: rng.gen_range(0..2) as f64,
                delta: rng.gen_range(0..2) as f64,
                vehicle_capacity: 4,
            };
            let z = rng.gen_range(1..4u32);
            let d_r = rng.gen_range(1..4) as f64;
            let refs: Vec<&Agent> = agents.iter().collect();
            let got = trip_value(z, d_r, &refs, &costs).unwrap();
            // Independent term-by-term recomputation.
            let mut want = 0.0;
            for a in &agents {
                let late = (z as f64 + d_r - a.theta).max(0.0);
                let delay = match &a.delay {
                    DelayFn::Linear { slope } => slope * late,
                    _ => unreachable!(),
                };
                want += a.alpha - a.beta * d_r - 0.5 * (n as f64 - 1.0) - delay;
            }
            want -= (costs.sigma + costs.delta * d_r) * n as f64;
            assert!((got.unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn xi_zero_and_example2_table() {
        let costs = zero_costs(6);
        let pi = DisutilityTable(
            (1..=6).map(|n| Some(if n <= 5 { 0.25 } else { 0.5 } * (n - 1) as f64)).collect(),
        );
        let gamma = DisutilityTable::zero(6);
        assert_eq!(xi(0, 1.0, &pi, &gamma, &costs), Some(0.0));
        assert!((xi(6, 1.0, &pi, &gamma, &costs).unwrap() - 15.0).abs() < 1e-9);
    }

    #[test]
    fn eta_example1() {
        let m = example1_agent(1);
        assert!((eta(&m, 1, 2.2).unwrap() - 3.8).abs() < 1e-9);
    }

    #[test]
    fn augmented_value_of_empty_pool() {
        let got = augmented_value(1, 1.0, &[], &zero_costs(2)).unwrap();
        assert_eq!(got, Augmented { value: 0.0, representative: BTreeSet::new() });
    }

    #[test]
    fn heterogeneous_pool_rejected() {
        let a = example1_agent(1);
        let mut b = example1_agent(2);
        b.pi = DisutilityTable(vec![Some(0.0), Some(1.0)]);
        assert!(matches!(
            augmented_value(1, 2.2, &[&a, &b], &zero_costs(2)),
            Err(PrefError::HeterogeneousDisutility { .. })
        ));
    }

    /// Brute-force max of `trip_value` over subgroups within capacity.
    fn brute_augmented(z: u32, d_r: f64, pool: &[&Agent], costs: &MarketCosts) -> f64 {
        let n = pool.len();
        let mut best = 0.0f64;
        for mask in 1u32..(1 << n) {
            if mask.count_ones() > costs.vehicle_capacity {
                continue;
            }
            let group: Vec<&Agent> =
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pool[i]).collect();
            if let Some(v) = trip_value(z, d_r, &group, costs).unwrap() {
                best = best.max(v);
            }
        }
        best
    }

    #[test]
    fn greedy_matches_bruteforce_on_random_homogeneous_pools() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        for _ in 0..300 {
            let n = rng.gen_range(0..=8usize);
            let cap = rng.gen_range(1..=4u32);
            let pi = DisutilityTable(
                (0..cap)
                    .map(|k| {
                        if rng.gen_bool(0.15) && k >= 1 {
                            None
                        } else {
                            Some(k as f64 * rng.gen_range(0..=2) as f64)
                        }
                    })
                    .scan(false, |dead, v| {
                        // keep infeasible entries absorbing
                        if v.is_none() {
                            *dead = true;
                        }
                        Some(if *dead { None } else { v })
                    })
                    .collect(),
            );
            let pi = if pi.validate().is_ok() { pi } else { DisutilityTable::zero(cap) };
            let gamma = DisutilityTable::zero(cap);
            let agents: Vec<Agent> = (0..n)
                .map(|i| {
                    let mut a = agent(
                        i as AgentId,
                        rng.gen_range(-2..12) as f64,
                        rng.gen_range(0..3) as f64,
                        rng.gen_range(1..5) as f64,
                        if rng.gen_bool(0.3) {
                            DelayFn::HardDeadline
                        } else {
                            DelayFn::Linear { slope: rng.gen_range(0..4) as f64 }
                        },
                    );
                    a.pi = pi.clone();
                    a.gamma = gamma.clone();
                    a
                })
                .collect();
            let costs = MarketCosts {
                sigma: rng.gen_range(0..2) as f64 * 0.5,
                delta: rng.gen_range(0..2) as f64 * 0.5,
                vehicle_capacity: cap,
            };
            let z = rng.gen_range(1..3u32);
            let d_r = rng.gen_range(1..4) as f64;
            let refs: Vec<&Agent> = agents.iter().collect();
            let got = augmented_value(z, d_r, &refs, &costs).unwrap();
            let want = brute_augmented(z, d_r, &refs, &costs);
            assert!(
                (got.value - want).abs() < 1e-9,
                "greedy {} vs brute {} (n={n}, cap={cap})",
                got.value,
                want
            );
            // The representative group attains the augmented value.
            let h: Vec<&Agent> =
                agents.iter().filter(|a| got.representative.contains(&a.id)).collect();
            if h.is_empty() {
                assert_eq!(got.value, 0.0);
            } else {
                let hv = trip_value(z, d_r, &h, &costs).unwrap().unwrap();
                assert!((hv - got.value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn augmented_value_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6usize);
            let agents: Vec<Agent> = (0..n)
                .map(|i| agent(i as AgentId, rng.gen_range(0..10) as f64, 1.0, 3.0, DelayFn::Linear { slope: 1.0 }))
                .collect();
            let costs = zero_costs(3);
            // exhaustively compare V(sub) <= V(sup) over nested subset pairs
            for sup_mask in 0u32..(1 << n) {
                let sup: Vec<&Agent> =
                    (0..n).filter(|i| sup_mask & (1 << i) != 0).map(|i| &agents[i]).collect();
                let v_sup = augmented_value(1, 2.0, &sup, &costs).unwrap().value;
                let mut sub_mask = sup_mask;
                loop {
                    let sub: Vec<&Agent> =
                        (0..n).filter(|i| sub_mask & (1 << i) != 0).map(|i| &agents[i]).collect();
                    let v_sub = augmented_value(1, 2.0, &sub, &costs).unwrap().value;
                    assert!(v_sub <= v_sup + 1e-9);
                    if sub_mask == 0 {
                        break;
                    }
                    sub_mask = (sub_mask - 1) & sup_mask;
                }
            }
        }
    }

    #[test]
    fn table_validation_rejects_decreasing_marginals() {
        let t = DisutilityTable(vec![Some(0.0), Some(2.0), Some(3.0)]); // marginals 2, 1
        assert!(t.validate().is_err());
        let t = DisutilityTable(vec![Some(0.0), Some(1.0), Some(2.5)]); // marginals 1, 1.5
        assert!(t.validate().is_ok());
        let t = DisutilityTable(vec![Some(0.0), None, Some(3.0)]); // revives after infeasible
        assert!(t.validate().is_err());
        let t = DisutilityTable(vec![Some(0.5)]); // solo disutility nonzero
        assert!(t.validate().is_err());
    }

    #[test]
    fn piecewise_delay_interpolates_and_extrapolates() {
        let d = DelayFn::PiecewiseLinear { points: vec![(1.0, 2.0), (3.0, 10.0)] };
        assert_eq!(d.eval(0.0), Some(0.0));
        assert!((d.eval(0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.eval(2.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((d.eval(4.0).unwrap() - 14.0).abs() < 1e-12);
    }
}
