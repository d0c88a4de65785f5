//! Shared inputs for the routing benchmarks.

use std::path::PathBuf;

use tasr_core::harness::{CommoditySource, ExperimentConfig, Scenario};
use tasr_core::net::{parse_network, parse_trips};
use tasr_core::{Commodity, Network};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(data_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn sioux_falls() -> Network {
    parse_network(&read("SiouxFalls_net.tntp")).expect("bundled network parses")
}

pub fn sioux_falls_trips() -> Vec<Commodity> {
    parse_trips(&read("SiouxFalls_trips.tntp")).expect("bundled trips parse")
}

/// Single-commodity experiment on the four-path (20, 10) subgraph.
pub fn subgraph_config(seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        network: data_dir().join("sf_20_10_subgraph.tntp"),
        commodities: CommoditySource::Pairs(vec![[20, 10]]),
        seeds,
        ..Default::default()
    }
}

pub fn subgraph() -> Scenario {
    Scenario::load(&subgraph_config(1)).expect("subgraph scenario")
}
