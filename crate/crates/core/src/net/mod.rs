//! Road network model: directed edges with BPR parameters, commodities,
//! explicit paths, and the path machinery used by the assignment solvers.

mod paths;
mod tntp;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use paths::{enumerate_paths, path_cost, shortest_path, DEFAULT_K_PATHS};
pub use tntp::{parse_network, parse_trips, write_network, write_trips};

/// Node identifier as it appears in the input files (1-based in TNTP data).
pub type NodeId = u32;

/// Position of an edge in [`Network::edges`]. Link records keep file order,
/// so edge `i` is the `i+1`-th record of the link file.
pub type EdgeId = usize;

pub const DEFAULT_LAMBDA: f64 = 0.15;
pub const DEFAULT_BETA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub tail: NodeId,
    pub head: NodeId,
    /// Free-flow travel time in minutes.
    pub free_flow_time: f64,
    /// Capacity in vehicles per hour.
    pub capacity: f64,
    pub lambda: f64,
    pub beta: f64,
    // Carried through from the link file so that a network survives a
    // write/parse round trip; not used by any computation.
    pub length: f64,
    pub speed: f64,
    pub toll: f64,
    pub link_type: i64,
}

impl Edge {
    /// An edge with the default BPR shape and zeroed bookkeeping columns.
    pub fn bpr(tail: NodeId, head: NodeId, free_flow_time: f64, capacity: f64) -> Self {
        Edge {
            id: 0,
            tail,
            head,
            free_flow_time,
            capacity,
            lambda: DEFAULT_LAMBDA,
            beta: DEFAULT_BETA,
            length: free_flow_time,
            speed: 0.0,
            toll: 0.0,
            link_type: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Data(format!(
                "edge {} ({} -> {}): {what}",
                self.id, self.tail, self.head
            )))
        };
        if !(self.free_flow_time > 0.0 && self.free_flow_time.is_finite()) {
            return bad("free-flow time must be positive");
        }
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return bad("capacity must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("BPR lambda must be nonnegative");
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return bad("BPR beta must be at least 1");
        }
        if self.tail == self.head {
            return bad("self-loops are not supported");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: BTreeSet<NodeId>,
    edges: Vec<Edge>,
    /// Outgoing edge ids per dense node index, ascending.
    adjacency: Vec<Vec<EdgeId>>,
    node_index: HashMap<NodeId, usize>,
    node_ids: Vec<NodeId>,
    metadata: Vec<(String, String)>,
}

impl Network {
    /// Builds a network from edges in id order. Edge ids are reassigned to
    /// their position in `edges`.
    pub fn new(edges: Vec<Edge>) -> Result<Self> {
        Self::with_metadata(edges, BTreeSet::new(), Vec::new())
    }

    pub(crate) fn with_metadata(
        mut edges: Vec<Edge>,
        extra_nodes: BTreeSet<NodeId>,
        metadata: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut nodes = extra_nodes;
        for (i, e) in edges.iter_mut().enumerate() {
            e.id = i;
            e.validate()?;
            nodes.insert(e.tail);
            nodes.insert(e.head);
        }
        let node_ids: Vec<NodeId> = nodes.iter().copied().collect();
        let node_index: HashMap<NodeId, usize> =
            node_ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut adjacency = vec![Vec::new(); node_ids.len()];
        for e in &edges {
            adjacency[node_index[&e.tail]].push(e.id);
        }
        Ok(Network {
            nodes,
            edges,
            adjacency,
            node_index,
            node_ids,
            metadata,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.node_index.contains_key(&node)
    }

    /// Outgoing edge ids of `node`, ascending. Empty for unknown nodes.
    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        match self.node_index.get(&node) {
            Some(&i) => &self.adjacency[i],
            None => &[],
        }
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.free_flow_time).collect()
    }

    pub(crate) fn dense_index(&self, node: NodeId) -> Option<usize> {
        self.node_index.get(&node).copied()
    }

    pub(crate) fn node_at(&self, index: usize) -> NodeId {
        self.node_ids[index]
    }

    pub(crate) fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    /// Rebuilds the adjacency lists from the edge list and compares.
    pub fn check_adjacency(&self) -> bool {
        let mut rebuilt = vec![Vec::new(); self.node_ids.len()];
        for e in &self.edges {
            match (self.node_index.get(&e.tail), self.node_index.get(&e.head)) {
                (Some(&t), Some(_)) => rebuilt[t].push(e.id),
                _ => return false,
            }
        }
        rebuilt == self.adjacency
    }

    /// Sub-network induced by the given edges. Edge ids are renumbered in the
    /// order given; node ids are kept.
    pub fn subnetwork(&self, edges: &[EdgeId]) -> Result<Network> {
        Network::new(edges.iter().map(|&e| self.edges[e].clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    pub source: NodeId,
    pub destination: NodeId,
    /// Demand in vehicles per hour.
    pub demand: f64,
}

impl Commodity {
    pub fn new(source: NodeId, destination: NodeId, demand: f64) -> Self {
        Commodity {
            source,
            destination,
            demand,
        }
    }

    /// Checks the commodity against a network: distinct endpoints that both
    /// exist, nonnegative demand and a connecting path.
    pub fn validate(&self, network: &Network) -> Result<()> {
        if !(self.demand >= 0.0 && self.demand.is_finite()) {
            return Err(Error::Data(format!(
                "commodity {} -> {} has invalid demand {}",
                self.source, self.destination, self.demand
            )));
        }
        if self.source == self.destination {
            return Err(Error::Data(format!(
                "commodity {} -> {} has identical endpoints",
                self.source, self.destination
            )));
        }
        for node in [self.source, self.destination] {
            if !network.contains(node) {
                return Err(Error::Data(format!(
                    "commodity {} -> {} references node {node} absent from the network",
                    self.source, self.destination
                )));
            }
        }
        shortest_path(
            network,
            &network.free_flow_times(),
            self.source,
            self.destination,
        )
        .map(|_| ())
    }
}

/// A simple path, stored as its ordered edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn new(edges: Vec<EdgeId>) -> Self {
        Path { edges }
    }

    pub fn contains(&self, edge: EdgeId) -> bool {
        self.edges.contains(&edge)
    }

    /// Node sequence visited by the path.
    pub fn nodes(&self, network: &Network) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        if let Some(&first) = self.edges.first() {
            out.push(network.edge(first).tail);
        }
        out.extend(self.edges.iter().map(|&e| network.edge(e).head));
        out
    }

    pub fn free_flow_time(&self, network: &Network) -> f64 {
        path_cost(&self.edges, &network.free_flow_times())
    }

    /// Connected, simple, and running from `source` to `destination`.
    pub fn is_valid(&self, network: &Network, source: NodeId, destination: NodeId) -> bool {
        if self.edges.is_empty() || self.edges.iter().any(|&e| e >= network.num_edges()) {
            return false;
        }
        let connected = self
            .edges
            .windows(2)
            .all(|w| network.edge(w[0]).head == network.edge(w[1]).tail);
        let nodes = self.nodes(network);
        let distinct: BTreeSet<_> = nodes.iter().collect();
        connected
            && distinct.len() == nodes.len()
            && nodes.first() == Some(&source)
            && nodes.last() == Some(&destination)
    }
}

/// Working path sets, one list per commodity, in commodity order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet {
    per_commodity: Vec<Vec<Path>>,
}

impl PathSet {
    pub fn new(per_commodity: Vec<Vec<Path>>) -> Result<Self> {
        for (i, paths) in per_commodity.iter().enumerate() {
            if paths.is_empty() {
                return Err(Error::Data(format!("commodity {i} has no paths")));
            }
            let distinct: BTreeSet<_> = paths.iter().collect();
            if distinct.len() != paths.len() {
                return Err(Error::Data(format!("commodity {i} has duplicate paths")));
            }
        }
        Ok(PathSet { per_commodity })
    }

    /// Enumerates up to `k` free-flow-shortest paths for every commodity.
    pub fn enumerate(network: &Network, commodities: &[Commodity], k: usize) -> Result<Self> {
        let per_commodity = commodities
            .iter()
            .map(|c| enumerate_paths(network, c, k))
            .collect::<Result<Vec<_>>>()?;
        PathSet::new(per_commodity)
    }

    pub fn num_commodities(&self) -> usize {
        self.per_commodity.len()
    }

    pub fn commodity(&self, i: usize) -> &[Path] {
        &self.per_commodity[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Path]> {
        self.per_commodity.iter().map(Vec::as_slice)
    }

    pub fn total_paths(&self) -> usize {
        self.per_commodity.iter().map(Vec::len).sum()
    }

    /// Distinct edges used by any path.
    pub fn edge_set(&self) -> BTreeSet<EdgeId> {
        self.per_commodity
            .iter()
            .flatten()
            .flat_map(|p| p.edges.iter().copied())
            .collect()
    }

    /// Keeps only the listed commodities, in the given order.
    pub fn select(&self, commodities: &[usize]) -> PathSet {
        PathSet {
            per_commodity: commodities
                .iter()
                .map(|&i| self.per_commodity[i].clone())
                .collect(),
        }
    }
}
