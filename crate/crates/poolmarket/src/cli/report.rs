//! Report structures and emission. JSON reports are deterministic for fixed
//! inputs and flags (maps are ordered, trips sorted); the `timing_ms` field
//! is the only run-dependent entry and is excluded from that guarantee.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cli::Instance;
use crate::equilibrium::{EquilibriumReport, Pipeline, PriceMode};
use crate::AgentId;

#[derive(Debug, Serialize)]
pub struct TripRow {
    pub z: u32,
    pub route: String,
    pub group: Vec<AgentId>,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct RoutePriceRow {
    pub route: String,
    pub z: u32,
    pub price: f64,
    pub slots: u32,
    pub trips: u32,
}

#[derive(Debug, Serialize)]
pub struct EdgeTollRow {
    pub edge: String,
    pub tick: u32,
    pub toll: f64,
}

#[derive(Debug, Serialize)]
pub struct VerificationSummary {
    pub mode: String,
    pub individual_rationality: bool,
    pub stability: bool,
    pub budget_balance: bool,
    pub market_clearing: bool,
    pub pass: bool,
    pub tolerance: f64,
    pub coverage: f64,
    pub violations: Vec<String>,
}

impl VerificationSummary {
    pub fn from_report(mode: PriceMode, r: &EquilibriumReport) -> VerificationSummary {
        let mut violations = Vec::new();
        for (name, check) in [
            ("individual_rationality", &r.individual_rationality),
            ("stability", &r.stability),
            ("budget_balance", &r.budget_balance),
            ("market_clearing", &r.market_clearing),
        ] {
            for v in check.violations.iter().take(8) {
                violations.push(format!("{name}: {v}"));
            }
        }
        VerificationSummary {
            mode: match mode {
                PriceMode::Route => "route".into(),
                PriceMode::Edge => "edge".into(),
            },
            individual_rationality: r.individual_rationality.pass,
            stability: r.stability.pass,
            budget_balance: r.budget_balance.pass,
            market_clearing: r.market_clearing.pass,
            pass: r.pass(),
            tolerance: r.tolerance,
            coverage: r.coverage,
        violations,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ExistenceCertificate {
    pub method: String,
    pub lp_value: Option<f64>,
    pub ip_value: Option<f64>,
    pub gap: Option<f64>,
    pub lp_fractional: Option<bool>,
    pub verdict: String,
}

#[derive(Debug, Serialize)]
pub struct VcgReport {
    pub utilities: BTreeMap<AgentId, f64>,
    pub payments: BTreeMap<AgentId, f64>,
    pub welfare_without: BTreeMap<AgentId, f64>,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub network_is_series_parallel: bool,
    pub homogeneous_disutilities: bool,
    pub epsilon: f64,
    pub welfare: f64,
    pub trips: Vec<TripRow>,
    pub carpool_size_histogram: BTreeMap<u32, u32>,
    pub utilities: BTreeMap<AgentId, f64>,
    pub payments: BTreeMap<AgentId, f64>,
    pub route_prices: Vec<RoutePriceRow>,
    pub lambda_spread: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_tolls: Option<Vec<EdgeTollRow>>,
    pub verification: VerificationSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_existence: Option<ExistenceCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vcg: Option<VcgReport>,
    pub timing_ms: u64,
}

impl SolveReport {
    pub fn build(
        inst: &Instance,
        pipeline: &Pipeline,
        verification: VerificationSummary,
        timing_ms: u64,
    ) -> SolveReport {
        let mut trips: Vec<TripRow> = pipeline
            .trips
            .trips
            .iter()
            .map(|t| {
                let members: Vec<_> =
                    inst.agents.iter().filter(|a| t.group.contains(&a.id)).collect();
                TripRow {
                    z: t.z,
                    route: inst.routes[t.route].label(&inst.network),
                    group: t.group.iter().copied().collect(),
                    value: crate::preferences::trip_value(
                        t.z,
                        inst.routes[t.route].total_time,
                        &members,
                        &inst.costs,
                    )
                    .expect("within capacity")
                    .expect("feasible"),
                }
            })
            .collect();
        trips.sort_by(|a, b| (a.z, &a.route, &a.group).cmp(&(b.z, &b.route, &b.group)));
        let mut histogram: BTreeMap<u32, u32> = BTreeMap::new();
        for t in &trips {
            *histogram.entry(t.group.len() as u32).or_default() += 1;
        }
        let slot_caps = pipeline.slot_caps();
        let mut organized: BTreeMap<(usize, u32), u32> = BTreeMap::new();
        for t in &pipeline.trips.trips {
            *organized.entry((t.route, t.z)).or_default() += 1;
        }
        let route_prices: Vec<RoutePriceRow> = pipeline
            .prices
            .route_prices
            .iter()
            .map(|(&(ri, z), &price)| RoutePriceRow {
                route: inst.routes[ri].label(&inst.network),
                z,
                price,
                slots: slot_caps.get(&(ri, z)).copied().unwrap_or(0),
                trips: organized.get(&(ri, z)).copied().unwrap_or(0),
            })
            .collect();
        let edge_tolls = pipeline.prices.edge_tolls.as_ref().map(|tolls| {
            tolls
                .iter()
                .map(|(&(e, tick), &toll)| EdgeTollRow {
                    edge: inst.network.edges[e].id.clone(),
                    tick,
                    toll,
                })
                .collect()
        });
        SolveReport {
            network_is_series_parallel: pipeline.is_series_parallel,
            homogeneous_disutilities: inst.homogeneous(),
            epsilon: pipeline.auction.epsilon,
            welfare: pipeline.welfare,
            trips,
            carpool_size_histogram: histogram,
            utilities: pipeline.prices.utilities.clone(),
            payments: pipeline.prices.payments.clone(),
            route_prices,
            lambda_spread: pipeline.prices.lambda_spread,
            edge_tolls,
            verification,
            equilibrium_existence: None,
            vcg: None,
            timing_ms,
        }
    }

    /// Price and payment tables as CSV (money with six decimals, one row per
    /// entity and time).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("table,entity,time,value\n");
        for r in &self.route_prices {
            out.push_str(&format!("route_price,{},{},{:.6}\n", r.route, r.z, r.price));
        }
        if let Some(tolls) = &self.edge_tolls {
            for t in tolls {
                out.push_str(&format!("edge_toll,{},{},{:.6}\n", t.edge, t.tick, t.toll));
            }
        }
        for (agent, p) in &self.payments {
            out.push_str(&format!("payment,{agent},,{p:.6}\n"));
        }
        for (agent, u) in &self.utilities {
            out.push_str(&format!("utility,{agent},,{u:.6}\n"));
        }
        out
    }
}
