//! Instance ingestion, subcommand dispatch, report emission and bundled
//! regression fixtures.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Edge, Network, RawNetwork, Route};
use crate::preferences::{Agent, MarketCosts};
use crate::AgentId;

mod commands;
mod report;

pub use commands::run;
pub use report::{SolveReport, VerificationSummary};

/// On-disk instance schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub network: NetworkSpec,
    pub market: MarketCosts,
    pub agents: Vec<Agent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<PopulationSpec>>,
}

/// Network block; origin/destination may be omitted only when populations
/// (which carry their own origin-destination pairs) are given.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
    pub horizon: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub id: String,
    pub members: Vec<AgentId>,
    pub origin: String,
    pub destination: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("network: {0}")]
    Network(#[from] crate::network::NetworkError),
}

/// A loaded single-population instance: validated network, enumerated
/// routes, validated agents.
#[derive(Debug, Clone)]
pub struct Instance {
    pub network: Network,
    pub routes: Vec<Route>,
    pub agents: Vec<Agent>,
    pub costs: MarketCosts,
    pub epsilon: Option<f64>,
}

impl Instance {
    pub fn horizon(&self) -> u32 {
        self.network.horizon
    }

    pub fn agent_by_id(&self, id: AgentId) -> Option<&Agent> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// All agents share identical pooling-disutility tables?
    pub fn homogeneous(&self) -> bool {
        self.agents.windows(2).all(|w| w[0].same_disutility(&w[1]))
    }

    /// Auction step size: the instance's override, else
    /// `min(1/(4|M|), 1e-3)`, which satisfies the `eps < 1/(2|M|)` bound with
    /// margin.
    pub fn epsilon_or_default(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            let m = self.agents.len().max(1) as f64;
            (1.0 / (4.0 * m)).min(1e-3)
        })
    }

    pub fn build(
        raw: RawNetwork,
        agents: Vec<Agent>,
        costs: MarketCosts,
        epsilon: Option<f64>,
    ) -> Result<Instance, CliError> {
        validate_market(&costs)?;
        validate_agents(&agents)?;
        let network = Network::validate(&raw)?;
        let routes = network.enumerate_routes()?;
        Ok(Instance { network, routes, agents, costs, epsilon })
    }

    /// The same instance without one agent (for VCG re-solves).
    pub fn without_agent(&self, id: AgentId) -> Instance {
        let mut out = self.clone();
        out.agents.retain(|a| a.id != id);
        out
    }
}

fn validate_market(costs: &MarketCosts) -> Result<(), CliError> {
    if costs.sigma < 0.0 || costs.delta < 0.0 {
        return Err(CliError::Schema("market: sigma and delta must be nonnegative".into()));
    }
    if costs.vehicle_capacity == 0 {
        return Err(CliError::Schema("market: vehicle_capacity must be at least 1".into()));
    }
    Ok(())
}

fn validate_agents(agents: &[Agent]) -> Result<(), CliError> {
    let mut seen: BTreeSet<AgentId> = BTreeSet::new();
    for a in agents {
        if !seen.insert(a.id) {
            return Err(CliError::Schema(format!("duplicate agent id {}", a.id)));
        }
        a.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    }
    Ok(())
}

/// Parse an instance file. Files with a `populations` block load as multi-
/// population instances; everything else is a single market over the
/// network's origin-destination pair.
pub fn parse_instance_str(text: &str) -> Result<Loaded, CliError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
    match &file.populations {
        None => {
            let origin = file
                .network
                .origin
                .clone()
                .ok_or_else(|| CliError::Schema("network.origin is required".into()))?;
            let destination = file
                .network
                .destination
                .clone()
                .ok_or_else(|| CliError::Schema("network.destination is required".into()))?;
            let raw = RawNetwork {
                edges: file.network.edges.clone(),
                origin,
                destination,
                horizon: file.network.horizon,
            };
            Ok(Loaded::Single(Instance::build(raw, file.agents, file.market, file.epsilon)?))
        }
        Some(pops) => {
            validate_market(&file.market)?;
            validate_agents(&file.agents)?;
            let multi = crate::multipop::MultiInstance::build(
                file.network.edges.clone(),
                file.network.horizon,
                file.agents,
                file.market,
                pops.clone(),
                file.epsilon,
            )
            .map_err(|e| CliError::Schema(e.to_string()))?;
            Ok(Loaded::Multi(multi))
        }
    }
}

pub fn load_instance(path: &std::path::Path) -> Result<Loaded, CliError> {
    parse_instance_str(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone)]
pub enum Loaded {
    Single(Instance),
    Multi(crate::multipop::MultiInstance),
}

impl Loaded {
    pub fn single(self) -> Result<Instance, CliError> {
        match self {
            Loaded::Single(i) => Ok(i),
            Loaded::Multi(_) => {
                Err(CliError::Schema("expected a single-population instance".into()))
            }
        }
    }
}

/// Explicit set-function table for the gross-substitutes checker. Keys are
/// comma-joined sorted agent ids; the empty set may be omitted (value 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTableFile {
    pub ground_set: Vec<AgentId>,
    pub values: std::collections::BTreeMap<String, f64>,
}

impl ValueTableFile {
    pub fn to_table(&self) -> Result<std::collections::BTreeMap<Vec<AgentId>, f64>, CliError> {
        let mut out = std::collections::BTreeMap::new();
        for (k, &v) in &self.values {
            let ids: Vec<AgentId> = if k.is_empty() {
                Vec::new()
            } else {
                k.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<AgentId>()
                            .map_err(|_| CliError::Schema(format!("bad table key '{k}'")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            if sorted != ids {
                return Err(CliError::Schema(format!("table key '{k}' is not sorted")));
            }
            out.insert(ids, v);
        }
        Ok(out)
    }
}

/// Bundled regression fixtures, embedded so `demo` works from any directory.
pub fn builtin_fixture(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(include_str!("../fixtures/example1.json")),
        "example2" => Some(include_str!("../fixtures/example2.json")),
        "gs-footnote" => Some(include_str!("../fixtures/gs_footnote.json")),
        "bay-mini" => Some(include_str!("../fixtures/bay_mini.json")),
        _ => None,
    }
}

/// Typed access to the bundled fixtures.
pub mod fixtures {
    use super::*;

    pub fn example1() -> Instance {
        parse_instance_str(builtin_fixture("example1").unwrap()).unwrap().single().unwrap()
    }

    pub fn example2() -> Instance {
        parse_instance_str(builtin_fixture("example2").unwrap()).unwrap().single().unwrap()
    }

    pub fn footnote_table() -> std::collections::BTreeMap<Vec<AgentId>, f64> {
        let f: ValueTableFile =
            serde_json::from_str(builtin_fixture("gs-footnote").unwrap()).unwrap();
        f.to_table().unwrap()
    }

    pub fn bay_mini() -> crate::multipop::MultiInstance {
        match parse_instance_str(builtin_fixture("bay-mini").unwrap()).unwrap() {
            Loaded::Multi(m) => m,
            Loaded::Single(_) => unreachable!("bay-mini is a multi-population fixture"),
        }
    }
}
