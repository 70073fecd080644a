//! Market equilibria for dynamic trip pooling on capacitated networks.
//!
//! The solver computes optimal trip organization (who shares a vehicle, on
//! which route, departing when), per-route capacity prices, agent payments
//! and VCG outcomes for two-terminal networks with integer edge capacities,
//! together with brute-force oracles that certify optimality, equilibrium
//! conditions and gross-substitutes structure on desk-scale instances.
//!
//! Pipeline for a series-parallel network and homogeneous pooling
//! disutilities:
//!
//! 1. [`flowcap`] turns edge capacities into static route capacities and a
//!    temporally repeated slot set (one slot per unit of route capacity per
//!    departure time),
//! 2. [`auction`] runs an ascending auction that assigns agents to slots and
//!    produces a Walrasian utility vector,
//! 3. [`equilibrium`] assembles the trip vector, route prices, payments,
//!    edge tolls and VCG quantities, and verifies the four equilibrium
//!    conditions,
//! 4. [`multipop`] extends the pipeline to general networks with multiple
//!    populations via branch-and-price.
//!
//! [`oracle`] holds independent brute-force ground truth used by the test
//! and acceptance suites; [`lp`] is the dense simplex kernel backing the
//! oracles, edge-toll recovery and the restricted master problem.

pub mod auction;
pub mod cli;
pub mod equilibrium;
pub mod flowcap;
pub mod lp;
pub mod multipop;
pub mod network;
pub mod oracle;
pub mod preferences;

/// Agent identifier as given in instance files.
pub type AgentId = u32;

/// Absolute tolerance for money comparisons.
pub const MONEY_TOL: f64 = 1e-9;

/// Absolute tolerance for time-feasibility checks (`z + d_r <= T + TIME_TOL`).
pub const TIME_TOL: f64 = 1e-9;
