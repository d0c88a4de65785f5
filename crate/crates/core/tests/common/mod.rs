#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use tasr_core::{Commodity, DemandGroup, Edge, Network, Path, PathSet};

pub const ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Links in parallel between nodes 1 and 2, one path per link.
pub fn parallel(links: &[(f64, f64)]) -> (Network, PathSet, Vec<Commodity>) {
    let edges = links.iter().map(|&(t, c)| Edge::bpr(1, 2, t, c)).collect();
    let net = Network::new(edges).unwrap();
    let paths = PathSet::new(vec![(0..links.len()).map(|e| Path::new(vec![e])).collect()]).unwrap();
    (net, paths, vec![Commodity::new(1, 2, 0.0)])
}

/// 1 -> {2,3} -> {4,5} -> 6 with every arc between consecutive layers, so
/// the four paths share edges pairwise. `links` gives (t_ff, capacity) for
/// the eight arcs.
pub fn layered(links: &[(f64, f64)]) -> (Network, PathSet, Vec<Commodity>) {
    let arcs = [(1, 2), (1, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 6), (5, 6)];
    let edges = arcs
        .iter()
        .zip(links)
        .map(|(&(t, h), &(fft, cap))| Edge::bpr(t, h, fft, cap))
        .collect();
    let net = Network::new(edges).unwrap();
    let commodities = vec![Commodity::new(1, 6, 0.0)];
    let paths = PathSet::enumerate(&net, &commodities, 16).unwrap();
    (net, paths, commodities)
}

pub fn link() -> impl Strategy<Value = (f64, f64)> {
    (1.0f64..20.0, 1.0f64..20.0)
}

/// A single-commodity instance: either parallel links or the layered graph.
pub fn network() -> impl Strategy<Value = (Network, PathSet, Vec<Commodity>)> {
    prop_oneof![
        prop::collection::vec(link(), 2..6).prop_map(|l| parallel(&l)),
        prop::collection::vec(link(), 8).prop_map(|l| layered(&l)),
    ]
}

/// Group parameters: (amount, index into `ALPHAS`).
pub fn group_specs() -> impl Strategy<Value = Vec<(f64, usize)>> {
    prop::collection::vec((0.5f64..15.0, 0usize..ALPHAS.len()), 1..6)
}

/// Groups on commodity 0 with free-flow priors.
pub fn groups(net: &Network, paths: &PathSet, specs: &[(f64, usize)]) -> Vec<DemandGroup> {
    let prior: Vec<f64> = paths.commodity(0).iter().map(|p| p.free_flow_time(net)).collect();
    specs
        .iter()
        .enumerate()
        .map(|(id, &(amount, a))| DemandGroup::new(id, 0, amount, ALPHAS[a], prior.clone()))
        .collect()
}

/// Splits `total` over the paths of each commodity by the given weights.
pub fn spread(paths: &PathSet, demands: &[Commodity], weights: &[f64]) -> Vec<Vec<f64>> {
    let mut w = weights.iter().cycle();
    paths
        .iter()
        .zip(demands)
        .map(|(ps, c)| {
            let raw: Vec<f64> = ps.iter().map(|_| *w.next().unwrap()).collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|x| c.demand * x / sum).collect()
        })
        .collect()
}
