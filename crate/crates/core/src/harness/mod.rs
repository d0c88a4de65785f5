//! Experiment orchestration: configuration, demand generation, seed sweeps
//! and aggregation.

mod output;
pub mod rng;

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{solve_ue, SolverConfig};
use crate::error::{Error, Result};
use crate::net::{parse_network, parse_trips, Commodity, Network, NodeId, PathSet, DEFAULT_K_PATHS};
use crate::strategies::{DemandGroup, Instance, ResponseMode, StrategyKind};
use crate::trust::{repeated_interaction, GroupTrust, TrustSimulation, DEFAULT_EPSILON};

pub use output::{
    emit_csv, emit_summary_json, emit_trajectory_csv, format_float, summarize, write_csv, write_summary_json,
    write_trajectory_csv, Aggregate, Stat, Summary,
};
use rng::{stream, Purpose};

/// One trust level and the share of total demand it receives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustClass {
    pub alpha: f64,
    pub share: f64,
}

/// One-sixth each at zero and full trust; the remaining two thirds split
/// evenly over 0.25, 0.5 and 0.75.
pub fn default_trust_classes() -> Vec<TrustClass> {
    vec![
        TrustClass { alpha: 0.0, share: 1.0 / 6.0 },
        TrustClass { alpha: 0.25, share: 2.0 / 9.0 },
        TrustClass { alpha: 0.5, share: 2.0 / 9.0 },
        TrustClass { alpha: 0.75, share: 2.0 / 9.0 },
        TrustClass { alpha: 1.0, share: 1.0 / 6.0 },
    ]
}

/// Where commodities come from: explicit origin/destination pairs, or every
/// positive pair of the trips file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommoditySource {
    Pairs(Vec<[NodeId; 2]>),
    Keyword(String),
}

impl Default for CommoditySource {
    fn default() -> Self {
        CommoditySource::Keyword("from-trips".into())
    }
}

/// The belief groups hold about path latencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    #[default]
    FreeFlow,
    /// Latencies of the user equilibrium of the full demand.
    Ue,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free-flow" => Ok(PriorKind::FreeFlow),
            "ue" => Ok(PriorKind::Ue),
            _ => Err(Error::Config(format!("unknown prior `{s}` (expected free-flow or ue)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: PathBuf,
    pub trips: Option<PathBuf>,
    pub commodities: CommoditySource,
    /// Demand per edge of the routed network.
    pub delta: f64,
    pub trust_classes: Vec<TrustClass>,
    pub strategies: Vec<StrategyKind>,
    pub seeds: usize,
    pub base_seed: u64,
    pub interactions: usize,
    pub epsilon: f64,
    pub response_mode: ResponseMode,
    pub k_paths: usize,
    pub prior: PriorKind,
    /// Multi-commodity runs cut each trust class into this many equal parts.
    pub groups_per_class: usize,
    pub solver: SolverConfig,
    /// Fail with a non-convergence error when the optimum of any seed does
    /// not reach the gap target.
    pub require_convergence: bool,
    /// Record wall-clock time per cell. Off by default so output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            network: PathBuf::new(),
            trips: None,
            commodities: CommoditySource::default(),
            delta: 5.0,
            trust_classes: default_trust_classes(),
            strategies: StrategyKind::ALL.to_vec(),
            seeds: 100,
            base_seed: 0,
            interactions: 1,
            epsilon: DEFAULT_EPSILON,
            response_mode: ResponseMode::Bernoulli,
            k_paths: DEFAULT_K_PATHS,
            prior: PriorKind::FreeFlow,
            groups_per_class: 4,
            solver: SolverConfig::default(),
            require_convergence: false,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Reads a JSON config; relative file paths inside it are taken relative
    /// to the config file's directory.
    pub fn load(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(FsPath::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.network);
        if let Some(t) = cfg.trips.as_mut() {
            rebase(t);
        }
        Ok(cfg)
    }

    /// Full check, including where commodities come from.
    pub fn validate(&self) -> Result<()> {
        self.validate_protocol()?;
        match &self.commodities {
            CommoditySource::Keyword(k) if k != "from-trips" => Err(Error::Config(format!(
                "commodities must be a list of pairs or \"from-trips\", got {k:?}"
            ))),
            CommoditySource::Keyword(_) if self.trips.is_none() => {
                Err(Error::Config("commodities \"from-trips\" needs a trips file".into()))
            }
            CommoditySource::Pairs(p) if p.is_empty() => Err(Error::Config("commodity list is empty".into())),
            _ => Ok(()),
        }
    }

    /// Checks the experiment protocol alone: demand, trust classes, seeds
    /// and solver settings.
    pub fn validate_protocol(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.trust_classes.is_empty() {
            return bad("at least one trust class is required".into());
        }
        for c in &self.trust_classes {
            if !(0.0..=1.0).contains(&c.alpha) || !(c.share >= 0.0) {
                return bad(format!("invalid trust class {c:?}"));
            }
        }
        let total: f64 = self.trust_classes.iter().map(|c| c.share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("trust class shares sum to {total}, not 1"));
        }
        if self.strategies.is_empty() {
            return bad("no strategies selected".into());
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.interactions == 0 {
            return bad("interactions must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if self.k_paths == 0 {
            return bad("k_paths must be at least 1".into());
        }
        if self.groups_per_class == 0 {
            return bad("groups_per_class must be at least 1".into());
        }
        self.solver.validate()
    }
}

/// A parsed network with its candidate commodities and their paths.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Network,
    pub commodities: Vec<Commodity>,
    pub paths: PathSet,
}

impl Scenario {
    pub fn new(network: Network, commodities: Vec<Commodity>, k_paths: usize) -> Result<Self> {
        if commodities.is_empty() {
            return Err(Error::Data("no commodities".into()));
        }
        for c in &commodities {
            c.validate(&network).map_err(|e| match e {
                Error::Domain(m) => Error::Data(m),
                other => other,
            })?;
        }
        let paths = PathSet::enumerate(&network, &commodities, k_paths)?;
        Ok(Scenario {
            network,
            commodities,
            paths,
        })
    }

    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let read = |p: &FsPath| -> Result<String> {
            fs::read_to_string(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
        };
        let network = parse_network(&read(&cfg.network)?).map_err(|e| e.context(cfg.network.display().to_string()))?;
        let commodities = match &cfg.commodities {
            CommoditySource::Pairs(pairs) => pairs.iter().map(|&[s, d]| Commodity::new(s, d, 0.0)).collect(),
            CommoditySource::Keyword(_) => {
                let path = cfg.trips.as_ref().expect("validated");
                parse_trips(&read(path)?).map_err(|e| e.context(path.display().to_string()))?
            }
        };
        Scenario::new(network, commodities, cfg.k_paths)
    }

    pub fn is_single_commodity(&self) -> bool {
        self.commodities.len() == 1
    }

    /// Total demand `delta * |edges|`.
    pub fn total_demand(&self, delta: f64) -> f64 {
        delta * self.network.num_edges() as f64
    }
}

/// Demand groups for one seed. A single commodity gets one group per trust
/// class. With several commodities, each class is cut into
/// `groups_per_class` equal parts and each part goes to a commodity drawn
/// uniformly at random. Group ids are assigned in generation order.
pub fn generate_demands(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64) -> Result<Vec<DemandGroup>> {
    cfg.validate_protocol()?;
    let total = scenario.total_demand(cfg.delta);
    let mut groups = Vec::new();
    if scenario.is_single_commodity() {
        for (id, c) in cfg.trust_classes.iter().enumerate() {
            groups.push(DemandGroup::new(id, 0, c.share * total, c.alpha, Vec::new()));
        }
    } else {
        let mut rng = stream(seed, Purpose::Demand);
        let parts = cfg.groups_per_class;
        for c in &cfg.trust_classes {
            for _ in 0..parts {
                let commodity = rng.random_range(0..scenario.commodities.len());
                let id = groups.len();
                groups.push(DemandGroup::new(id, commodity, c.share * total / parts as f64, c.alpha, Vec::new()));
            }
        }
    }
    set_priors(scenario, &mut groups, cfg.prior, &cfg.solver)?;
    Ok(groups)
}

fn set_priors(scenario: &Scenario, groups: &mut [DemandGroup], prior: PriorKind, solver: &SolverConfig) -> Result<()> {
    let net = &scenario.network;
    let beliefs: Vec<Vec<f64>> = match prior {
        PriorKind::FreeFlow => scenario
            .paths
            .iter()
            .map(|ps| ps.iter().map(|p| p.free_flow_time(net)).collect())
            .collect(),
        PriorKind::Ue => {
            let mut demands: Vec<Commodity> = scenario
                .commodities
                .iter()
                .map(|c| Commodity::new(c.source, c.destination, 0.0))
                .collect();
            for g in groups.iter() {
                demands[g.commodity].demand += g.amount;
            }
            let ue = solve_ue(net, &scenario.paths, &demands, solver, None)?;
            ue.flows.path_latencies(net, &scenario.paths, None)
        }
    };
    for g in groups {
        g.prior = beliefs[g.commodity].clone();
    }
    Ok(())
}

/// The commodities that carry demand, with groups renumbered to index into
/// that subset. Keeps solver work proportional to the active commodities.
pub fn active_subset(scenario: &Scenario, groups: &[DemandGroup]) -> (Vec<Commodity>, PathSet, Vec<DemandGroup>) {
    let mut used: Vec<usize> = groups.iter().filter(|g| g.amount > 0.0).map(|g| g.commodity).collect();
    used.sort_unstable();
    used.dedup();
    if used.is_empty() {
        used.push(0);
    }
    let commodities = used.iter().map(|&i| scenario.commodities[i]).collect();
    let paths = scenario.paths.select(&used);
    let remapped = groups
        .iter()
        .filter(|g| used.binary_search(&g.commodity).is_ok())
        .map(|g| DemandGroup {
            commodity: used.binary_search(&g.commodity).unwrap(),
            ..g.clone()
        })
        .collect();
    (commodities, paths, remapped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub interaction: usize,
    pub congestion: f64,
    pub per_unit_tt: f64,
    pub efficiency_ratio: f64,
    pub runtime_s: Option<f64>,
    pub groups: Vec<GroupTrust>,
}

/// Facts about one seed's optimum, kept for the summary metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimumInfo {
    pub seed: u64,
    pub objective: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub optima: Vec<OptimumInfo>,
    pub summary: Summary,
}

/// Runs one seed: every configured strategy over `cfg.interactions` rounds.
pub fn run_seed(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64) -> Result<(Vec<ResultRecord>, OptimumInfo)> {
    let ctx = |e: Error| e.context(format!("seed {seed}"));
    let groups = generate_demands(cfg, scenario, seed).map_err(ctx)?;
    let (commodities, paths, groups) = active_subset(scenario, &groups);
    let inst = Instance::new(&scenario.network, &paths, &commodities)?;
    let opt = inst.system_optimum(&groups, &cfg.solver).map_err(ctx)?;
    let info = OptimumInfo {
        seed,
        objective: opt.objective,
        relative_gap: opt.relative_gap,
        iterations: opt.iterations,
        converged: opt.converged,
    };
    if cfg.require_convergence && !opt.converged {
        return Err(ctx(Error::NonConvergence {
            iterations: opt.iterations,
            gap: opt.relative_gap,
        }));
    }
    let total: f64 = groups.iter().map(|g| g.amount).sum();
    let mut records = Vec::with_capacity(cfg.strategies.len() * cfg.interactions);
    for &strategy in &cfg.strategies {
        let sim = TrustSimulation {
            instance: inst,
            strategy,
            epsilon: cfg.epsilon,
            mode: cfg.response_mode,
            solver: cfg.solver,
            optimum: Some(opt.objective),
        };
        let start = Instant::now();
        let (_, trajectory) = repeated_interaction(&sim, &groups, cfg.interactions, seed)
            .map_err(|e| e.context(format!("seed {seed}, strategy {strategy}")))?;
        let elapsed = start.elapsed().as_secs_f64() / cfg.interactions as f64;
        for rec in trajectory {
            records.push(ResultRecord {
                strategy,
                seed,
                interaction: rec.interaction,
                congestion: rec.congestion,
                per_unit_tt: if total > 0.0 { rec.congestion / total } else { 0.0 },
                efficiency_ratio: rec.efficiency_ratio,
                runtime_s: cfg.timing.then_some(elapsed),
                groups: rec.groups,
            });
        }
    }
    Ok((records, info))
}

/// Seeds `base_seed .. base_seed + seeds`, run in parallel and merged in
/// (seed, strategy, interaction) order.
pub fn run_scenario(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<ExperimentOutput> {
    cfg.validate_protocol()?;
    let per_seed: Vec<(Vec<ResultRecord>, OptimumInfo)> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|s| run_seed(cfg, scenario, cfg.base_seed.wrapping_add(s)))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut optima = Vec::new();
    for (r, o) in per_seed {
        records.extend(r);
        optima.push(o);
    }
    let summary = summarize(cfg, scenario, &records, &optima)?;
    Ok(ExperimentOutput {
        records,
        optima,
        summary,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let scenario = Scenario::load(cfg)?;
    run_scenario(cfg, &scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Edge;

    fn subgraph_like(edges: usize) -> Scenario {
        // A chain of parallel twin links so the edge count is controllable.
        let mut es = Vec::new();
        for i in 0..edges {
            es.push(Edge::bpr(1, 2, 10.0 + i as f64, 10.0));
        }
        let net = Network::new(es).unwrap();
        Scenario::new(net, vec![Commodity::new(1, 2, 0.0)], 16).unwrap()
    }

    #[test]
    fn single_commodity_shares() {
        let cfg = ExperimentConfig::default();
        let sc = subgraph_like(16);
        let g = generate_demands(&cfg, &sc, 0).unwrap();
        let amounts: Vec<f64> = g.iter().map(|g| g.amount).collect();
        let total: f64 = amounts.iter().sum();
        assert!((total - 80.0).abs() < 1e-9);
        assert!((amounts[0] - 80.0 / 6.0).abs() < 1e-9);
        assert!((amounts[4] - 80.0 / 6.0).abs() < 1e-9);
        for a in &amounts[1..4] {
            assert!((a - 160.0 / 9.0).abs() < 1e-9);
        }
        assert_eq!(g[0].prior, vec![10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0, 25.0]);
    }

    #[test]
    fn one_edge_network_total() {
        let cfg = ExperimentConfig::default();
        let g = generate_demands(&cfg, &subgraph_like(1), 0).unwrap();
        assert!((g.iter().map(|g| g.amount).sum::<f64>() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn multi_commodity_assignment_varies_by_seed() {
        let net = Network::new(vec![
            Edge::bpr(1, 2, 1.0, 1.0),
            Edge::bpr(2, 3, 1.0, 1.0),
            Edge::bpr(1, 3, 3.0, 1.0),
            Edge::bpr(3, 1, 1.0, 1.0),
        ])
        .unwrap();
        let cs = vec![Commodity::new(1, 3, 0.0), Commodity::new(1, 2, 0.0), Commodity::new(3, 2, 0.0)];
        let sc = Scenario::new(net, cs, 4).unwrap();
        let cfg = ExperimentConfig::default();
        let a = generate_demands(&cfg, &sc, 1).unwrap();
        let b = generate_demands(&cfg, &sc, 2).unwrap();
        assert_eq!(a.len(), 20);
        let ca: Vec<_> = a.iter().map(|g| g.commodity).collect();
        let cb: Vec<_> = b.iter().map(|g| g.commodity).collect();
        assert_ne!(ca, cb);
        let ta: f64 = a.iter().map(|g| g.amount).sum();
        let tb: f64 = b.iter().map(|g| g.amount).sum();
        assert!((ta - 20.0).abs() < 1e-9 && (tb - 20.0).abs() < 1e-9);
        assert_eq!(a, generate_demands(&cfg, &sc, 1).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig {
            commodities: CommoditySource::Pairs(vec![[1, 2]]),
            ..Default::default()
        };
        assert!(cfg.validate().is_ok());
        cfg.delta = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.delta = 5.0;
        cfg.trust_classes[0].share = 0.5;
        assert!(cfg.validate().is_err());
        let parsed = ExperimentConfig::from_json(r#"{"delta": 3, "strategies": ["TASR", "Aloof"], "commodities": [[20, 10]]}"#)
            .unwrap();
        assert_eq!(parsed.strategies, vec![StrategyKind::Tasr, StrategyKind::Aloof]);
        assert_eq!(parsed.commodities, CommoditySource::Pairs(vec![[20, 10]]));
        assert!(ExperimentConfig::from_json(r#"{"deltaa": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"strategies": ["Greedy"]}"#).is_err());
    }

    #[test]
    fn cc_only_has_unit_ratio() {
        let sc = subgraph_like(3);
        let cfg = ExperimentConfig {
            commodities: CommoditySource::Pairs(vec![[1, 2]]),
            strategies: vec![StrategyKind::Cc],
            seeds: 3,
            ..Default::default()
        };
        let out = run_scenario(&cfg, &sc).unwrap();
        assert_eq!(out.records.len(), 3);
        for r in &out.records {
            assert!((r.efficiency_ratio - 1.0).abs() < 1e-12);
        }
    }
}
