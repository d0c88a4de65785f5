//! BPR link latencies, path latencies, total congestion and the Beckmann
//! potential.

use crate::error::{Error, Result};
use crate::net::{Edge, Network, Path, PathSet};

/// `base^exp`, by repeated squaring when `exp` is a small nonnegative integer.
#[inline]
fn power(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && (0.0..=64.0).contains(&exp) {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

impl Edge {
    /// BPR travel time `t_ff * (1 + lambda * (flow / c)^beta)` in minutes.
    #[inline]
    pub fn latency(&self, flow: f64) -> f64 {
        debug_assert!(flow >= 0.0);
        self.free_flow_time * (1.0 + self.lambda * power(flow / self.capacity, self.beta))
    }

    /// `d/dx [x * latency(x)]`, the cost an extra unit of flow imposes on
    /// the whole edge.
    #[inline]
    pub fn marginal_cost(&self, flow: f64) -> f64 {
        self.free_flow_time
            * (1.0 + self.lambda * (self.beta + 1.0) * power(flow / self.capacity, self.beta))
    }

    /// `integral_0^flow latency(x) dx`.
    #[inline]
    pub fn latency_integral(&self, flow: f64) -> f64 {
        self.free_flow_time
            * (flow
                + self.lambda * power(flow, self.beta + 1.0)
                    / ((self.beta + 1.0) * power(self.capacity, self.beta)))
    }
}

/// Checked edge latency: negative or non-finite flows are a domain error.
pub fn edge_latency(edge: &Edge, flow: f64) -> Result<f64> {
    if !(flow >= 0.0 && flow.is_finite()) {
        return Err(Error::Domain(format!(
            "edge {} received invalid flow {flow}",
            edge.id
        )));
    }
    Ok(edge.latency(flow))
}

/// Sum of edge latencies along `path` under the given edge flows.
pub fn path_latency(network: &Network, path: &Path, edge_flows: &[f64]) -> Result<f64> {
    path.edges.iter().try_fold(0.0, |acc, &e| {
        let flow = edge_flows.get(e).copied().ok_or_else(|| {
            Error::Domain(format!("no flow given for edge {e} on the path"))
        })?;
        Ok(acc + edge_latency(network.edge(e), flow)?)
    })
}

/// Latency of every edge under `edge_flows`.
pub fn edge_latencies(network: &Network, edge_flows: &[f64]) -> Vec<f64> {
    network
        .edges()
        .iter()
        .zip(edge_flows)
        .map(|(e, &f)| e.latency(f))
        .collect()
}

/// Path and edge flows of one assignment. `path_flows[i][j]` is the flow on
/// path `j` of commodity `i` of the accompanying [`PathSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector {
    pub path_flows: Vec<Vec<f64>>,
    pub edge_flows: Vec<f64>,
}

impl FlowVector {
    pub fn zeros(network: &Network, paths: &PathSet) -> Self {
        FlowVector {
            path_flows: paths.iter().map(|p| vec![0.0; p.len()]).collect(),
            edge_flows: vec![0.0; network.num_edges()],
        }
    }

    /// Builds a flow vector from path flows, deriving edge flows through the
    /// link-path incidence.
    pub fn from_path_flows(network: &Network, paths: &PathSet, path_flows: Vec<Vec<f64>>) -> Self {
        let mut edge_flows = vec![0.0; network.num_edges()];
        for (flows, plist) in path_flows.iter().zip(paths.iter()) {
            for (&f, p) in flows.iter().zip(plist) {
                if f != 0.0 {
                    for &e in &p.edges {
                        edge_flows[e] += f;
                    }
                }
            }
        }
        FlowVector {
            path_flows,
            edge_flows,
        }
    }

    pub fn add_path_flow(&mut self, paths: &PathSet, commodity: usize, path: usize, amount: f64) {
        self.path_flows[commodity][path] += amount;
        for &e in &paths.commodity(commodity)[path].edges {
            self.edge_flows[e] += amount;
        }
    }

    pub fn commodity_total(&self, commodity: usize) -> f64 {
        self.path_flows[commodity].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.path_flows.iter().flatten().sum()
    }

    /// Recomputes edge flows from path flows and compares within `tol`
    /// (relative to the larger magnitude).
    pub fn is_consistent(&self, network: &Network, paths: &PathSet, tol: f64) -> bool {
        let rebuilt = FlowVector::from_path_flows(network, paths, self.path_flows.clone());
        self.path_flows.iter().flatten().all(|&f| f >= -tol)
            && rebuilt
                .edge_flows
                .iter()
                .zip(&self.edge_flows)
                .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0))
    }

    /// Every commodity's path flows sum to its demand within `tol`.
    pub fn is_feasible(&self, demands: &[f64], tol: f64) -> bool {
        self.path_flows.len() == demands.len()
            && self
                .path_flows
                .iter()
                .zip(demands)
                .all(|(f, &r)| (f.iter().sum::<f64>() - r).abs() <= tol * r.max(1.0))
    }

    /// Latency of every path under the current edge flows plus `background`.
    pub fn path_latencies(
        &self,
        network: &Network,
        paths: &PathSet,
        background: Option<&[f64]>,
    ) -> Vec<Vec<f64>> {
        let loads = total_loads(&self.edge_flows, background);
        let lat = edge_latencies(network, &loads);
        paths
            .iter()
            .map(|plist| plist.iter().map(|p| p.edges.iter().map(|&e| lat[e]).sum()).collect())
            .collect()
    }
}

pub(crate) fn total_loads(edge_flows: &[f64], background: Option<&[f64]>) -> Vec<f64> {
    match background {
        Some(b) => edge_flows.iter().zip(b).map(|(f, b)| f + b).collect(),
        None => edge_flows.to_vec(),
    }
}

/// Total travel time `sum_e f_e * tau(f_e)` in vehicle-minutes.
pub fn edge_congestion(network: &Network, edge_flows: &[f64]) -> f64 {
    network
        .edges()
        .iter()
        .zip(edge_flows)
        .map(|(e, &f)| if f == 0.0 { 0.0 } else { f * e.latency(f) })
        .sum()
}

/// Total travel time `sum_P f_P * tau_P(f)` accumulated over paths.
pub fn path_congestion(network: &Network, paths: &PathSet, flows: &FlowVector) -> f64 {
    let lat = edge_latencies(network, &flows.edge_flows);
    flows
        .path_flows
        .iter()
        .zip(paths.iter())
        .flat_map(|(fs, plist)| fs.iter().zip(plist))
        .map(|(&f, p)| {
            if f == 0.0 {
                0.0
            } else {
                f * p.edges.iter().map(|&e| lat[e]).sum::<f64>()
            }
        })
        .sum()
}

/// Total congestion of a flow vector. The path and edge accumulations are
/// both computed; debug builds check that they agree.
pub fn total_congestion(network: &Network, paths: &PathSet, flows: &FlowVector) -> f64 {
    let by_edge = edge_congestion(network, &flows.edge_flows);
    debug_assert!({
        let by_path = path_congestion(network, paths, flows);
        (by_path - by_edge).abs() <= 1e-9 * by_edge.abs().max(1.0)
    });
    by_edge
}

/// Beckmann potential `sum_e integral_0^{f_e} tau_e`.
pub fn beckmann_potential(network: &Network, edge_flows: &[f64]) -> f64 {
    network
        .edges()
        .iter()
        .zip(edge_flows)
        .map(|(e, &f)| e.latency_integral(f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Edge;

    fn edge() -> Edge {
        Edge::bpr(1, 2, 10.0, 10.0)
    }

    fn twin() -> (Network, PathSet) {
        let net = Network::new(vec![edge(), Edge::bpr(1, 2, 10.0, 10.0)]).unwrap();
        let paths = PathSet::new(vec![vec![Path::new(vec![0]), Path::new(vec![1])]]).unwrap();
        (net, paths)
    }

    #[test]
    fn bpr_values() {
        let e = edge();
        assert_eq!(edge_latency(&e, 0.0).unwrap(), 10.0);
        assert!((edge_latency(&e, 10.0).unwrap() - 11.5).abs() < 1e-12);
        assert!((edge_latency(&e, 5.0).unwrap() - 10.09375).abs() < 1e-12);
        assert!(matches!(edge_latency(&e, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn non_integer_beta() {
        let mut e = edge();
        e.beta = 2.5;
        let expected = 10.0 * (1.0 + 0.15 * 0.5f64.powf(2.5));
        assert!((e.latency(5.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn path_latency_sums_edges() {
        let net = Network::new(vec![edge(), Edge::bpr(2, 3, 10.0, 10.0)]).unwrap();
        let p = Path::new(vec![0, 1]);
        assert!((path_latency(&net, &p, &[10.0, 0.0]).unwrap() - 21.5).abs() < 1e-12);
        let single = Path::new(vec![1]);
        assert_eq!(path_latency(&net, &single, &[0.0, 0.0]).unwrap(), 10.0);
        assert!(path_latency(&net, &p, &[1.0]).is_err());
    }

    #[test]
    fn twin_link_congestion() {
        let (net, paths) = twin();
        let zero = FlowVector::zeros(&net, &paths);
        assert_eq!(total_congestion(&net, &paths, &zero), 0.0);
        let even = FlowVector::from_path_flows(&net, &paths, vec![vec![5.0, 5.0]]);
        assert!((total_congestion(&net, &paths, &even) - 100.9375).abs() < 1e-9);
        let corner = FlowVector::from_path_flows(&net, &paths, vec![vec![10.0, 0.0]]);
        assert!((total_congestion(&net, &paths, &corner) - 115.0).abs() < 1e-9);
    }

    #[test]
    fn beckmann_values() {
        let (net, _) = twin();
        assert_eq!(beckmann_potential(&net, &[0.0, 0.0]), 0.0);
        let single = Network::new(vec![edge()]).unwrap();
        assert!((beckmann_potential(&single, &[10.0]) - 103.0).abs() < 1e-9);
        // Convexity: the even split has the lower potential.
        let split = beckmann_potential(&net, &[5.0, 5.0]);
        let corner = beckmann_potential(&net, &[10.0, 0.0]);
        assert!(split < corner, "{split} vs {corner}");
    }

    #[test]
    fn marginal_cost_is_derivative_of_total_cost() {
        let e = edge();
        let h = 1e-5;
        for f in [0.5, 3.0, 10.0, 25.0] {
            let numeric = ((f + h) * e.latency(f + h) - (f - h) * e.latency(f - h)) / (2.0 * h);
            assert!((numeric - e.marginal_cost(f)).abs() < 1e-6 * numeric);
        }
    }
}
