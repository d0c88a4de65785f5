//! Path-restricted Frank–Wolfe assignment: the complete-compliance system
//! optimum and the Wardrop user equilibrium.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{total_loads, FlowVector};
use crate::net::{Commodity, Network, Path, PathSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub relative_gap_target: f64,
    pub line_search_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 500,
            relative_gap_target: 1e-6,
            line_search_tolerance: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("relative_gap_target", self.relative_gap_target),
            ("line_search_tolerance", self.line_search_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub flows: FlowVector,
    pub objective: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl AssignmentResult {
    /// Turns a non-converged result into [`Error::NonConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                gap: self.relative_gap,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    /// Total travel time; Frank–Wolfe runs on marginal costs.
    System,
    /// Beckmann potential; Frank–Wolfe runs on latencies.
    Equilibrium,
}

impl Objective {
    fn edge_cost(self, network: &Network, loads: &[f64]) -> Vec<f64> {
        network
            .edges()
            .iter()
            .zip(loads)
            .map(|(e, &x)| match self {
                Objective::System => e.marginal_cost(x),
                Objective::Equilibrium => e.latency(x),
            })
            .collect()
    }

    /// Objective value of the flow on top of `background`, net of what the
    /// background alone contributes.
    fn value(self, network: &Network, edge_flows: &[f64], background: Option<&[f64]>) -> f64 {
        let term = |e: &crate::net::Edge, x: f64| match self {
            Objective::System => {
                if x == 0.0 {
                    0.0
                } else {
                    x * e.latency(x)
                }
            }
            Objective::Equilibrium => e.latency_integral(x),
        };
        network
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let b = background.map_or(0.0, |b| b[i]);
                if edge_flows[i] == 0.0 {
                    0.0
                } else {
                    term(e, b + edge_flows[i]) - term(e, b)
                }
            })
            .sum()
    }
}

/// Index of the cheapest path under `edge_costs`; exact ties (to 1e-12
/// relative) go to the lexicographically smallest edge sequence.
fn cheapest_path(paths: &[Path], edge_costs: &[f64]) -> usize {
    let cost = |p: &Path| p.edges.iter().map(|&e| edge_costs[e]).sum::<f64>();
    let mut best = 0;
    let mut best_cost = cost(&paths[0]);
    for (j, p) in paths.iter().enumerate().skip(1) {
        let c = cost(p);
        let slack = 1e-12 * best_cost.abs().max(1.0);
        if c < best_cost - slack || (c <= best_cost + slack && p.edges < paths[best].edges) {
            best = j;
            best_cost = c;
        }
    }
    best
}

/// Loads each commodity's whole demand onto its cheapest path under fixed
/// edge costs.
pub fn all_or_nothing(
    network: &Network,
    paths: &PathSet,
    demands: &[Commodity],
    edge_costs: &[f64],
) -> Result<FlowVector> {
    check_inputs(network, paths, demands)?;
    if let Some(c) = edge_costs.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(Error::Domain(format!("edge cost {c} is not a finite nonnegative number")));
    }
    let mut flows = FlowVector::zeros(network, paths);
    for (i, c) in demands.iter().enumerate() {
        if c.demand > 0.0 {
            let j = cheapest_path(paths.commodity(i), edge_costs);
            flows.add_path_flow(paths, i, j, c.demand);
        }
    }
    Ok(flows)
}

/// Root of a nondecreasing directional derivative on `[0, 1]` by bisection,
/// clamped to the endpoints when the derivative keeps one sign.
pub fn line_search(derivative: impl Fn(f64) -> f64, tolerance: f64) -> f64 {
    if derivative(0.0) >= 0.0 {
        return 0.0;
    }
    if derivative(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        let d = derivative(mid);
        if d == 0.0 {
            return mid;
        }
        if d < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(current - AON) / AON`, both evaluated as `sum_e f_e * cost_e` at the
/// given costs.
pub fn relative_gap(
    network: &Network,
    paths: &PathSet,
    demands: &[Commodity],
    flows: &FlowVector,
    edge_costs: &[f64],
) -> Result<f64> {
    let aon = all_or_nothing(network, paths, demands, edge_costs)?;
    Ok(gap_between(&flows.edge_flows, &aon.edge_flows, edge_costs))
}

fn gap_between(current: &[f64], aon: &[f64], costs: &[f64]) -> f64 {
    let dot = |f: &[f64]| f.iter().zip(costs).map(|(f, c)| f * c).sum::<f64>();
    let (cur, lower) = (dot(current), dot(aon));
    if lower <= 0.0 {
        return 0.0;
    }
    ((cur - lower) / lower).max(0.0)
}

fn check_inputs(network: &Network, paths: &PathSet, demands: &[Commodity]) -> Result<()> {
    if paths.num_commodities() != demands.len() {
        return Err(Error::Domain(format!(
            "{} commodities but path sets for {}",
            demands.len(),
            paths.num_commodities()
        )));
    }
    for (i, c) in demands.iter().enumerate() {
        if !(c.demand >= 0.0 && c.demand.is_finite()) {
            return Err(Error::Domain(format!("commodity {i} has demand {}", c.demand)));
        }
        if paths.commodity(i).iter().any(|p| !p.is_valid(network, c.source, c.destination)) {
            return Err(Error::NoPath {
                from: c.source,
                to: c.destination,
            });
        }
    }
    Ok(())
}

fn check_background(network: &Network, background: Option<&[f64]>) -> Result<()> {
    if let Some(b) = background {
        if b.len() != network.num_edges() {
            return Err(Error::Domain(format!(
                "background has {} entries for {} edges",
                b.len(),
                network.num_edges()
            )));
        }
        if b.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Domain("background flows must be finite and nonnegative".into()));
        }
    }
    Ok(())
}

fn frank_wolfe(
    objective: Objective,
    network: &Network,
    paths: &PathSet,
    demands: &[Commodity],
    cfg: &SolverConfig,
    background: Option<&[f64]>,
) -> Result<AssignmentResult> {
    cfg.validate()?;
    check_inputs(network, paths, demands)?;
    check_background(network, background)?;

    let costs_at = |x: &[f64]| objective.edge_cost(network, &total_loads(x, background));
    let mut x = all_or_nothing(network, paths, demands, &costs_at(&vec![0.0; network.num_edges()]))?;
    let mut value = objective.value(network, &x.edge_flows, background);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let costs = costs_at(&x.edge_flows);
        let y = all_or_nothing(network, paths, demands, &costs)?;
        gap = gap_between(&x.edge_flows, &y.edge_flows, &costs);
        if gap <= cfg.relative_gap_target {
            break;
        }
        iterations += 1;

        let dir: Vec<f64> = y.edge_flows.iter().zip(&x.edge_flows).map(|(y, x)| y - x).collect();
        let step = line_search(
            |s| {
                let trial: Vec<f64> = x.edge_flows.iter().zip(&dir).map(|(x, d)| x + s * d).collect();
                costs_at(&trial).iter().zip(&dir).map(|(c, d)| c * d).sum()
            },
            cfg.line_search_tolerance,
        );
        if step == 0.0 {
            break;
        }
        let mut next = x.clone();
        for (nf, yf) in next.path_flows.iter_mut().zip(&y.path_flows) {
            for (n, y) in nf.iter_mut().zip(yf) {
                *n += step * (y - *n);
            }
        }
        for (n, d) in next.edge_flows.iter_mut().zip(&dir) {
            *n = (*n + step * d).max(0.0);
        }
        let next_value = objective.value(network, &next.edge_flows, background);
        debug_assert!(
            next_value <= value + 1e-12 * value.abs().max(1.0),
            "objective rose from {value} to {next_value}"
        );
        x = next;
        value = next_value;
    }
    if gap > cfg.relative_gap_target {
        // Gap at the final iterate.
        let costs = costs_at(&x.edge_flows);
        let y = all_or_nothing(network, paths, demands, &costs)?;
        gap = gap_between(&x.edge_flows, &y.edge_flows, &costs);
    }

    Ok(AssignmentResult {
        objective: value,
        relative_gap: gap,
        iterations,
        converged: gap <= cfg.relative_gap_target,
        flows: x,
    })
}

/// System optimum: minimizes total travel time over the path flows, with
/// optional fixed background edge loads.
pub fn solve_cc(
    network: &Network,
    paths: &PathSet,
    demands: &[Commodity],
    cfg: &SolverConfig,
    background: Option<&[f64]>,
) -> Result<AssignmentResult> {
    frank_wolfe(Objective::System, network, paths, demands, cfg, background)
}

/// User equilibrium: minimizes the Beckmann potential over the path flows.
pub fn solve_ue(
    network: &Network,
    paths: &PathSet,
    demands: &[Commodity],
    cfg: &SolverConfig,
    background: Option<&[f64]>,
) -> Result<AssignmentResult> {
    frank_wolfe(Objective::Equilibrium, network, paths, demands, cfg, background)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::total_congestion;
    use crate::net::Edge;

    fn parallel(links: &[(f64, f64)]) -> (Network, PathSet) {
        let edges = links.iter().map(|&(t, c)| Edge::bpr(1, 2, t, c)).collect();
        let net = Network::new(edges).unwrap();
        let paths = PathSet::new(vec![(0..links.len()).map(|e| Path::new(vec![e])).collect()]).unwrap();
        (net, paths)
    }

    #[test]
    fn twin_link_cc_and_ue_split_evenly() {
        let (net, paths) = parallel(&[(10.0, 10.0), (10.0, 10.0)]);
        let d = [Commodity::new(1, 2, 10.0)];
        for res in [
            solve_cc(&net, &paths, &d, &SolverConfig::default(), None).unwrap(),
            solve_ue(&net, &paths, &d, &SolverConfig::default(), None).unwrap(),
        ] {
            assert!(res.converged);
            assert!((res.flows.path_flows[0][0] - 5.0).abs() < 1e-4);
            assert!((res.flows.path_flows[0][1] - 5.0).abs() < 1e-4);
        }
        let cc = solve_cc(&net, &paths, &d, &SolverConfig::default(), None).unwrap();
        assert!((cc.objective - 100.9375).abs() < 1e-6 * 100.9375);
    }

    #[test]
    fn single_path_is_forced() {
        let (net, paths) = parallel(&[(3.0, 2.0)]);
        let res = solve_cc(&net, &paths, &[Commodity::new(1, 2, 5.0)], &SolverConfig::default(), None).unwrap();
        assert_eq!(res.flows.path_flows, vec![vec![5.0]]);
        assert!(res.converged);
    }

    #[test]
    fn ue_corner_solution() {
        let (net, paths) = parallel(&[(10.0, 1000.0), (5.0, 10.0)]);
        let res = solve_ue(&net, &paths, &[Commodity::new(1, 2, 10.0)], &SolverConfig::default(), None).unwrap();
        assert_eq!(res.flows.path_flows[0], vec![0.0, 10.0]);
        assert!(res.converged);
    }

    #[test]
    fn aon_basics() {
        let (net, paths) = parallel(&[(10.0, 10.0), (12.0, 10.0)]);
        let d = [Commodity::new(1, 2, 7.0)];
        let f = all_or_nothing(&net, &paths, &d, &[10.0, 12.0]).unwrap();
        assert_eq!(f.path_flows[0], vec![7.0, 0.0]);
        let f = all_or_nothing(&net, &paths, &d, &[10.0, 10.0]).unwrap();
        assert_eq!(f.path_flows[0], vec![7.0, 0.0]);
        let f = all_or_nothing(&net, &paths, &d, &[12.0, 10.0]).unwrap();
        assert_eq!(f.edge_flows, vec![0.0, 7.0]);
        assert!(all_or_nothing(&net, &paths, &d, &[-1.0, 10.0]).is_err());
    }

    #[test]
    fn line_search_clamps_and_bisects() {
        assert_eq!(line_search(|s| 1.0 + s, 1e-9), 0.0);
        assert_eq!(line_search(|s| s - 2.0, 1e-9), 1.0);
        let s = line_search(|s| s - 0.3, 1e-9);
        assert!((s - 0.3).abs() < 1e-9);
    }

    #[test]
    fn twin_link_first_step_is_half() {
        // From (10, 0) the AON direction is (-10, 10); the derivative of
        // the objective along it vanishes at the midpoint.
        let (net, _) = parallel(&[(10.0, 10.0), (10.0, 10.0)]);
        let e = net.edge(0).clone();
        let s = line_search(
            |s| 10.0 * (e.marginal_cost(10.0 * s) - e.marginal_cost(10.0 - 10.0 * s)),
            1e-12,
        );
        assert!((s - 0.5).abs() < 1e-9);
    }

    #[test]
    fn gap_zero_at_aon_optimum_and_positive_off_it() {
        let (net, paths) = parallel(&[(10.0, 10.0), (10.0, 10.0)]);
        let d = [Commodity::new(1, 2, 10.0)];
        let f = FlowVector::from_path_flows(&net, &paths, vec![vec![10.0, 0.0]]);
        assert_eq!(relative_gap(&net, &paths, &d, &f, &[10.0, 12.0]).unwrap(), 0.0);
        let lat = [net.edge(0).latency(10.0), net.edge(1).latency(0.0)];
        assert!(relative_gap(&net, &paths, &d, &f, &lat).unwrap() > 0.0);
    }

    #[test]
    fn background_only_gives_zero() {
        let (net, paths) = parallel(&[(10.0, 10.0), (10.0, 10.0)]);
        let d = [Commodity::new(1, 2, 0.0)];
        let bg = [4.0, 7.0];
        for res in [
            solve_cc(&net, &paths, &d, &SolverConfig::default(), Some(&bg)).unwrap(),
            solve_ue(&net, &paths, &d, &SolverConfig::default(), Some(&bg)).unwrap(),
        ] {
            assert_eq!(res.flows.edge_flows, vec![0.0, 0.0]);
            assert_eq!(res.objective, 0.0);
        }
    }

    #[test]
    fn background_shifts_flow_away() {
        let (net, paths) = parallel(&[(10.0, 10.0), (10.0, 10.0)]);
        let d = [Commodity::new(1, 2, 10.0)];
        let res = solve_ue(&net, &paths, &d, &SolverConfig::default(), Some(&[6.0, 0.0])).unwrap();
        // Equal loads on both links: 6 + f0 = f1 with f0 + f1 = 10.
        assert!((res.flows.path_flows[0][0] - 2.0).abs() < 1e-3);
        let res = solve_cc(&net, &paths, &d, &SolverConfig::default(), Some(&[6.0, 0.0])).unwrap();
        assert!((res.flows.path_flows[0][0] - 2.0).abs() < 1e-3);
        let plain = FlowVector::from_path_flows(&net, &paths, vec![vec![8.0, 8.0]]);
        assert!(res.objective > 0.0 && res.objective < total_congestion(&net, &paths, &plain));
    }

    #[test]
    fn mismatched_inputs_are_errors() {
        let (net, paths) = parallel(&[(10.0, 10.0)]);
        let cfg = SolverConfig::default();
        assert!(solve_cc(&net, &paths, &[], &cfg, None).is_err());
        assert!(solve_cc(&net, &paths, &[Commodity::new(2, 1, 1.0)], &cfg, None).is_err());
        let bad = SolverConfig {
            max_iterations: 0,
            ..cfg
        };
        assert!(matches!(
            solve_cc(&net, &paths, &[Commodity::new(1, 2, 1.0)], &bad, None),
            Err(Error::Config(_))
        ));
    }
}
