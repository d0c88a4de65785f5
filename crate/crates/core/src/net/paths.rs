use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use super::{Commodity, EdgeId, Network, NodeId, Path};
use crate::error::{Error, Result};

pub const DEFAULT_K_PATHS: usize = 16;

/// Sum of `costs` over the edges, accumulated in path order.
pub fn path_cost(edges: &[EdgeId], costs: &[f64]) -> f64 {
    edges.iter().map(|&e| costs[e]).sum()
}

fn tight(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * rhs.abs().max(1.0)
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Minimum-cost simple path from `from` to `to`. Among equal-cost paths the
/// one with the lexicographically smallest edge-id sequence wins.
pub fn shortest_path(network: &Network, costs: &[f64], from: NodeId, to: NodeId) -> Result<Path> {
    let n = network.num_nodes();
    restricted_shortest_path(network, costs, from, to, &vec![false; network.num_edges()], &vec![
        false;
        n
    ])
}

/// Dijkstra over the edges not in `banned_edges` and nodes not in
/// `banned_nodes`, followed by a greedy walk over the tight edges that picks
/// the smallest edge id still able to reach the destination.
fn restricted_shortest_path(
    network: &Network,
    costs: &[f64],
    from: NodeId,
    to: NodeId,
    banned_edges: &[bool],
    banned_nodes: &[bool],
) -> Result<Path> {
    let no_path = || Error::NoPath { from, to };
    let s = network.dense_index(from).ok_or_else(no_path)?;
    let d = network.dense_index(to).ok_or_else(no_path)?;
    if banned_nodes[s] || banned_nodes[d] || s == d {
        return Err(no_path());
    }
    debug_assert!(costs.iter().all(|c| *c >= 0.0 && c.is_finite()));

    let n = network.num_nodes();
    let usable = |e: EdgeId| {
        let edge = network.edge(e);
        !banned_edges[e] && !banned_nodes[network.dense_index(edge.head).unwrap()]
    };

    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Reverse((Dist(0.0), s)));
    while let Some(Reverse((Dist(du), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &e in network.outgoing(network.node_at(u)) {
            if !usable(e) {
                continue;
            }
            let v = network.dense_index(network.edge(e).head).unwrap();
            let dv = du + costs[e];
            if dv < dist[v] {
                dist[v] = dv;
                heap.push(Reverse((Dist(dv), v)));
            }
        }
    }
    if !dist[d].is_finite() {
        return Err(no_path());
    }

    // Nodes that reach the destination along tight edges.
    let mut reaches = vec![false; n];
    reaches[d] = true;
    let mut order: Vec<usize> = (0..n).filter(|&v| dist[v].is_finite()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    for &u in &order {
        if reaches[u] {
            continue;
        }
        reaches[u] = network.outgoing(network.node_at(u)).iter().any(|&e| {
            if !usable(e) {
                return false;
            }
            let v = network.dense_index(network.edge(e).head).unwrap();
            reaches[v] && tight(dist[u] + costs[e], dist[v])
        });
    }

    let mut edges = Vec::new();
    let mut visited = vec![false; n];
    let mut u = s;
    visited[s] = true;
    while u != d {
        let next = network.outgoing(network.node_at(u)).iter().find(|&&e| {
            if !usable(e) {
                return false;
            }
            let v = network.dense_index(network.edge(e).head).unwrap();
            reaches[v] && !visited[v] && tight(dist[u] + costs[e], dist[v])
        });
        let &e = next.ok_or_else(no_path)?;
        edges.push(e);
        u = network.dense_index(network.edge(e).head).unwrap();
        visited[u] = true;
    }
    Ok(Path::new(edges))
}

#[derive(Clone, PartialEq)]
struct Ranked {
    cost: f64,
    edges: Vec<EdgeId>,
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.edges.cmp(&other.edges))
    }
}

/// The `k` simple paths with the smallest free-flow travel time, ascending,
/// ties broken by edge-id sequence (deviation-based k-shortest paths).
pub fn enumerate_paths(network: &Network, commodity: &Commodity, k: usize) -> Result<Vec<Path>> {
    if k == 0 {
        return Err(Error::Config("k for path enumeration must be at least 1".into()));
    }
    let costs = network.free_flow_times();
    let (src, dst) = (commodity.source, commodity.destination);
    let first = shortest_path(network, &costs, src, dst)?;

    let mut accepted: Vec<Ranked> = vec![Ranked {
        cost: path_cost(&first.edges, &costs),
        edges: first.edges,
    }];
    let mut candidates: BTreeSet<Ranked> = BTreeSet::new();
    let mut seen: BTreeSet<Vec<EdgeId>> = accepted.iter().map(|r| r.edges.clone()).collect();
    let mut banned_edges = vec![false; network.num_edges()];
    let mut banned_nodes = vec![false; network.num_nodes()];

    let mut expanded = 0;
    loop {
        // Expand every accepted path once.
        while expanded < accepted.len() {
            let prev = accepted[expanded].edges.clone();
            expanded += 1;
            let prev_nodes = Path::new(prev.clone()).nodes(network);
            for i in 0..prev.len() {
                let root = &prev[..i];
                banned_edges.iter_mut().for_each(|b| *b = false);
                banned_nodes.iter_mut().for_each(|b| *b = false);
                for p in &accepted {
                    if p.edges.len() > i && &p.edges[..i] == root {
                        banned_edges[p.edges[i]] = true;
                    }
                }
                for &node in &prev_nodes[..i] {
                    banned_nodes[network.dense_index(node).unwrap()] = true;
                }
                let spur_node = prev_nodes[i];
                let spur = match restricted_shortest_path(
                    network,
                    &costs,
                    spur_node,
                    dst,
                    &banned_edges,
                    &banned_nodes,
                ) {
                    Ok(p) => p,
                    Err(Error::NoPath { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let mut edges = root.to_vec();
                edges.extend(spur.edges);
                if seen.insert(edges.clone()) {
                    candidates.insert(Ranked {
                        cost: path_cost(&edges, &costs),
                        edges,
                    });
                }
            }
        }
        let Some(next) = candidates.first().cloned() else {
            break;
        };
        if accepted.len() >= k {
            // Keep pulling only while the next candidate ties the k-th cost, so
            // that the final ordering among ties is by edge sequence.
            let kth = accepted[k - 1].cost;
            if !tight(next.cost, kth) {
                break;
            }
        }
        candidates.pop_first();
        accepted.push(next);
    }
    accepted.sort();
    accepted.truncate(k);
    Ok(accepted.into_iter().map(|r| Path::new(r.edges)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Edge;

    fn twin(c0: f64, c1: f64) -> Network {
        Network::new(vec![Edge::bpr(1, 2, c0, 10.0), Edge::bpr(1, 2, c1, 10.0)]).unwrap()
    }

    /// 1 -> 2 -> 4 direct is two hops but expensive; 1 -> 2 -> 3 -> 4 is
    /// three hops and cheaper.
    fn diamond() -> Network {
        Network::new(vec![
            Edge::bpr(1, 2, 1.0, 10.0),
            Edge::bpr(1, 3, 5.0, 10.0),
            Edge::bpr(2, 4, 10.0, 10.0),
            Edge::bpr(3, 4, 1.0, 10.0),
            Edge::bpr(2, 3, 1.0, 10.0),
        ])
        .unwrap()
    }

    #[test]
    fn twin_link_prefers_cheaper_edge() {
        let net = twin(10.0, 12.0);
        let p = shortest_path(&net, &[10.0, 12.0], 1, 2).unwrap();
        assert_eq!(p.edges, vec![0]);
        let p = shortest_path(&net, &[12.0, 10.0], 1, 2).unwrap();
        assert_eq!(p.edges, vec![1]);
    }

    #[test]
    fn equal_costs_pick_smaller_id() {
        let net = twin(10.0, 10.0);
        let p = shortest_path(&net, &[10.0, 10.0], 1, 2).unwrap();
        assert_eq!(p.edges, vec![0]);
    }

    #[test]
    fn diamond_longer_hop_path_is_cheaper() {
        let net = diamond();
        let costs = net.free_flow_times();
        let p = shortest_path(&net, &costs, 1, 4).unwrap();
        // Oracle: the simple paths are [0,2]=11, [1,3]=6, [0,4,3]=3.
        assert_eq!(p.edges, vec![0, 4, 3]);
        assert_eq!(path_cost(&p.edges, &costs), 3.0);
    }

    #[test]
    fn unreachable_is_an_error() {
        let net = twin(10.0, 12.0);
        let err = shortest_path(&net, &[10.0, 12.0], 2, 1).unwrap_err();
        assert!(matches!(err, Error::NoPath { from: 2, to: 1 }));
    }

    #[test]
    fn twin_link_enumeration() {
        let net = twin(10.0, 12.0);
        let c = Commodity::new(1, 2, 1.0);
        let two = enumerate_paths(&net, &c, 2).unwrap();
        assert_eq!(two, vec![Path::new(vec![0]), Path::new(vec![1])]);
        let five = enumerate_paths(&net, &c, 5).unwrap();
        assert_eq!(five.len(), 2);
        assert!(enumerate_paths(&net, &c, 0).is_err());
    }

    #[test]
    fn diamond_enumeration_is_sorted() {
        let net = diamond();
        let paths = enumerate_paths(&net, &Commodity::new(1, 4, 1.0), 10).unwrap();
        let edges: Vec<_> = paths.iter().map(|p| p.edges.clone()).collect();
        assert_eq!(edges, vec![vec![0, 4, 3], vec![1, 3], vec![0, 2]]);
    }

    #[test]
    fn ties_are_ordered_by_edge_sequence() {
        // Three equal-cost parallel routes through different middle nodes.
        let net = Network::new(vec![
            Edge::bpr(1, 4, 1.0, 1.0),
            Edge::bpr(4, 9, 1.0, 1.0),
            Edge::bpr(1, 3, 1.0, 1.0),
            Edge::bpr(3, 9, 1.0, 1.0),
            Edge::bpr(1, 2, 1.0, 1.0),
            Edge::bpr(2, 9, 1.0, 1.0),
        ])
        .unwrap();
        let paths = enumerate_paths(&net, &Commodity::new(1, 9, 1.0), 2).unwrap();
        assert_eq!(paths, vec![Path::new(vec![0, 1]), Path::new(vec![2, 3])]);
    }
}
