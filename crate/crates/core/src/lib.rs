//! Trust-aware Stackelberg routing laboratory.
//!
//! The crate covers the whole pipeline: TNTP network ingestion and path
//! enumeration ([`net`]), BPR latencies ([`latency`]), Frank–Wolfe system
//! optimum and user equilibrium ([`assign`]), recommendation strategies and
//! the stochastic response model ([`strategies`]), trust dynamics over
//! repeated interactions ([`trust`]) and the experiment harness
//! ([`harness`]).

pub mod assign;
pub mod error;
pub mod harness;
pub mod latency;
pub mod net;
pub mod strategies;
pub mod trust;

pub use assign::{solve_cc, solve_ue, AssignmentResult, SolverConfig};
pub use error::{Error, Result};
pub use latency::{total_congestion, FlowVector};
pub use net::{Commodity, Edge, EdgeId, Network, NodeId, Path, PathSet};
pub use strategies::{
    DemandGroup, Instance, RecommendationProfile, ResponseMode, StrategyKind, StrategyOutcome,
};
