//! Demand groups, recommendation strategies, the stochastic response model,
//! the exhaustive best-response oracle and efficiency metrics.

mod baselines;
mod oracle;
mod tasr;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{solve_cc, AssignmentResult, SolverConfig};
use crate::error::{Error, Result};
use crate::latency::{total_congestion, FlowVector};
use crate::net::{Commodity, Network, PathSet};

pub use baselines::{aloof, ascale, ascale_rho, cc, llf, scale, COMPLIANCE_CUT};
pub use oracle::{exact_best_response, expected_congestion, split_by_profile, ORACLE_PROFILE_LIMIT};
pub use tasr::{tasr_multi, tasr_single};

/// Slack used when deciding whether a path still has room under f⊛.
pub(crate) const RESIDUAL_EPS: f64 = 1e-12;

/// A network, its path sets and the commodity endpoints. The `demand`
/// field of each commodity is ignored by the strategies; demand is always
/// the sum of the groups' amounts.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub network: &'a Network,
    pub paths: &'a PathSet,
    pub commodities: &'a [Commodity],
}

impl<'a> Instance<'a> {
    pub fn new(network: &'a Network, paths: &'a PathSet, commodities: &'a [Commodity]) -> Result<Self> {
        if paths.num_commodities() != commodities.len() {
            return Err(Error::Domain(format!(
                "{} commodities but path sets for {}",
                commodities.len(),
                paths.num_commodities()
            )));
        }
        Ok(Instance {
            network,
            paths,
            commodities,
        })
    }

    /// Commodities with demand equal to the groups' total amounts.
    pub fn demands(&self, groups: &[DemandGroup]) -> Vec<Commodity> {
        let mut out: Vec<Commodity> = self
            .commodities
            .iter()
            .map(|c| Commodity::new(c.source, c.destination, 0.0))
            .collect();
        for g in groups {
            out[g.commodity].demand += g.amount;
        }
        out
    }

    pub fn validate_groups(&self, groups: &[DemandGroup]) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for g in groups {
            if !ids.insert(g.id) {
                return Err(Error::Domain(format!("duplicate group id {}", g.id)));
            }
            if g.commodity >= self.paths.num_commodities() {
                return Err(Error::Domain(format!(
                    "group {} refers to commodity {} of {}",
                    g.id,
                    g.commodity,
                    self.paths.num_commodities()
                )));
            }
            g.validate(self.paths.commodity(g.commodity).len())?;
        }
        Ok(())
    }

    /// The complete-compliance optimum for the groups' total demand.
    pub fn system_optimum(&self, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<AssignmentResult> {
        solve_cc(self.network, self.paths, &self.demands(groups), cfg, None)
    }
}

/// A homogeneous group of travelers sharing one commodity, one trust level
/// and one prior belief over that commodity's paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandGroup {
    pub id: usize,
    pub commodity: usize,
    pub amount: f64,
    pub alpha: f64,
    /// Believed latency of each path of the commodity, in path-set order.
    pub prior: Vec<f64>,
}

impl DemandGroup {
    pub fn new(id: usize, commodity: usize, amount: f64, alpha: f64, prior: Vec<f64>) -> Self {
        DemandGroup {
            id,
            commodity,
            amount,
            alpha,
            prior,
        }
    }

    pub fn validate(&self, num_paths: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("group {} has trust {}", self.id, self.alpha)));
        }
        if !(self.amount >= 0.0 && self.amount.is_finite()) {
            return Err(Error::Domain(format!("group {} has amount {}", self.id, self.amount)));
        }
        if self.prior.len() != num_paths || self.prior.iter().any(|q| !q.is_finite()) {
            return Err(Error::Domain(format!(
                "group {} needs a finite prior for each of {num_paths} paths",
                self.id
            )));
        }
        Ok(())
    }

    pub fn is_noncompliant(&self) -> bool {
        self.alpha == 0.0
    }

    pub fn is_compliant(&self) -> bool {
        self.alpha == 1.0
    }
}

/// The path a group takes on its own: the argmin of its prior, first index
/// on ties.
pub fn selfish_path(group: &DemandGroup) -> usize {
    let mut best = 0;
    for (j, &q) in group.prior.iter().enumerate() {
        if q < group.prior[best] {
            best = j;
        }
    }
    best
}

/// Sorts groups by trust, then id. Equal trust levels are kept as separate
/// groups.
pub fn sort_by_trust(groups: &mut [DemandGroup]) {
    groups.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.id.cmp(&b.id)));
}

/// One bookkeeping entry of a profile. A group split across several paths
/// owns several entries; `path == None` means the strategy leaves that
/// share of the group to its own choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub group: usize,
    pub commodity: usize,
    pub path: Option<usize>,
    pub amount: f64,
    /// Flow the planner expects to move onto `path` because of this entry.
    pub planned_accept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationProfile {
    pub entries: Vec<Recommendation>,
    /// The planner's anticipated flow.
    pub planned_flow: FlowVector,
    /// The optimal flow the plan was built against.
    pub reference: FlowVector,
}

impl RecommendationProfile {
    pub fn for_group(&self, id: usize) -> impl Iterator<Item = &Recommendation> {
        self.entries.iter().filter(move |r| r.group == id)
    }

    /// Flow the strategy places through recommendations, per path.
    pub fn controllable_flow(&self, paths: &PathSet) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = paths.iter().map(|p| vec![0.0; p.len()]).collect();
        for r in &self.entries {
            if let Some(p) = r.path {
                out[r.commodity][p] += r.planned_accept;
            }
        }
        out
    }

    /// Controllable flow never exceeds the reference flow by more than
    /// `tol` on any path.
    pub fn is_opt_restricted(&self, paths: &PathSet, tol: f64) -> bool {
        self.controllable_flow(paths)
            .iter()
            .flatten()
            .zip(self.reference.path_flows.iter().flatten())
            .all(|(c, f)| *c <= f + tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseMode {
    /// Each group flips one coin: the whole group follows or ignores its
    /// recommendations.
    #[default]
    Bernoulli,
    /// Each group splits deterministically by its trust.
    Expected,
}

impl FromStr for ResponseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(ResponseMode::Bernoulli),
            "expected" => Ok(ResponseMode::Expected),
            _ => Err(Error::Config(format!("unknown response mode `{s}`"))),
        }
    }
}

impl fmt::Display for ResponseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseMode::Bernoulli => "bernoulli",
            ResponseMode::Expected => "expected",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResponse {
    pub group: usize,
    /// Share of the group that followed its recommendations: 0 or 1 in
    /// Bernoulli mode, the trust level in expected mode.
    pub accepted_share: f64,
    pub selfish: usize,
    /// `(path, amount)` pairs actually travelled.
    pub chosen: Vec<(usize, f64)>,
}

impl GroupResponse {
    pub fn accepted(&self) -> bool {
        self.accepted_share > 0.0
    }

    /// Amount-weighted latency of the paths the group travelled.
    pub fn chosen_latency(&self, path_latencies: &[f64]) -> f64 {
        let total: f64 = self.chosen.iter().map(|(_, a)| a).sum();
        if total <= 0.0 {
            return path_latencies[self.selfish];
        }
        self.chosen.iter().map(|&(p, a)| a * path_latencies[p]).sum::<f64>() / total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub realized_flow: FlowVector,
    pub congestion: f64,
    pub responses: Vec<GroupResponse>,
}

/// Realizes the travelers' response to a profile.
pub fn simulate_response<R: Rng + ?Sized>(
    inst: &Instance<'_>,
    profile: &RecommendationProfile,
    groups: &[DemandGroup],
    mode: ResponseMode,
    rng: &mut R,
) -> Result<StrategyOutcome> {
    inst.validate_groups(groups)?;
    let mut flow = FlowVector::zeros(inst.network, inst.paths);
    let mut responses = Vec::with_capacity(groups.len());
    for g in groups {
        let selfish = selfish_path(g);
        let entries: Vec<&Recommendation> = profile.for_group(g.id).collect();
        if entries.is_empty() && !g.is_noncompliant() {
            return Err(Error::Domain(format!("group {} has no recommendation", g.id)));
        }
        if let Some(r) = entries.iter().find(|r| r.commodity != g.commodity) {
            return Err(Error::Domain(format!(
                "group {} of commodity {} was recommended a path of commodity {}",
                g.id, g.commodity, r.commodity
            )));
        }
        let share = match mode {
            _ if g.is_noncompliant() => 0.0,
            _ if g.is_compliant() => 1.0,
            ResponseMode::Expected => g.alpha,
            ResponseMode::Bernoulli => {
                if rng.random::<f64>() < g.alpha {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let mut chosen: Vec<(usize, f64)> = Vec::new();
        let mut put = |path: usize, amount: f64| {
            if amount > 0.0 {
                match chosen.iter_mut().find(|(p, _)| *p == path) {
                    Some((_, a)) => *a += amount,
                    None => chosen.push((path, amount)),
                }
            }
        };
        let covered: f64 = entries.iter().map(|r| r.amount).sum();
        for r in &entries {
            let followed = match r.path {
                Some(p) => {
                    put(p, share * r.amount);
                    share * r.amount
                }
                None => 0.0,
            };
            put(selfish, r.amount - followed);
        }
        // Anything the profile did not cover stays on the selfish path.
        if g.amount - covered > RESIDUAL_EPS * g.amount.max(1.0) {
            put(selfish, g.amount - covered);
        }
        for &(p, a) in &chosen {
            flow.add_path_flow(inst.paths, g.commodity, p, a);
        }
        responses.push(GroupResponse {
            group: g.id,
            accepted_share: share,
            selfish,
            chosen,
        });
    }
    let congestion = total_congestion(inst.network, inst.paths, &flow);
    Ok(StrategyOutcome {
        realized_flow: flow,
        congestion,
        responses,
    })
}

/// Realized congestion relative to the complete-compliance optimum.
pub fn efficiency_ratio(outcome: &StrategyOutcome, cc_objective: f64) -> Result<f64> {
    if !(cc_objective > 0.0) {
        return Err(Error::Domain(format!("optimum {cc_objective} must be positive")));
    }
    Ok(outcome.congestion / cc_objective)
}

/// `f1` is dominated path-wise by `f2` (within 1e-9).
pub fn is_subflow(f1: &FlowVector, f2: &FlowVector) -> bool {
    f1.path_flows.len() == f2.path_flows.len()
        && f1.path_flows.iter().zip(&f2.path_flows).all(|(a, b)| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| *x <= y + 1e-9)
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "TASR")]
    Tasr,
    #[serde(rename = "LLF")]
    Llf,
    #[serde(rename = "Scale")]
    Scale,
    #[serde(rename = "ASCALE")]
    Ascale,
    #[serde(rename = "Aloof")]
    Aloof,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Cc,
        StrategyKind::Tasr,
        StrategyKind::Llf,
        StrategyKind::Scale,
        StrategyKind::Ascale,
        StrategyKind::Aloof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Cc => "CC",
            StrategyKind::Tasr => "TASR",
            StrategyKind::Llf => "LLF",
            StrategyKind::Scale => "Scale",
            StrategyKind::Ascale => "ASCALE",
            StrategyKind::Aloof => "Aloof",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// Builds the profile of the named strategy. For [`StrategyKind::Cc`] every
/// group is treated as fully compliant.
pub fn recommend(
    kind: StrategyKind,
    inst: &Instance<'_>,
    groups: &[DemandGroup],
    cfg: &SolverConfig,
) -> Result<RecommendationProfile> {
    match kind {
        StrategyKind::Cc => cc(inst, groups, cfg),
        StrategyKind::Tasr => tasr_multi(inst, groups, cfg),
        StrategyKind::Llf => llf(inst, groups, cfg),
        StrategyKind::Scale => scale(inst, groups, cfg),
        StrategyKind::Ascale => ascale(inst, groups, cfg),
        StrategyKind::Aloof => aloof(inst, groups, cfg),
    }
}

/// Profile plus simulated response. The CC strategy is simulated with every
/// group fully compliant, so its realized flow is the optimum.
pub fn run_strategy<R: Rng + ?Sized>(
    kind: StrategyKind,
    inst: &Instance<'_>,
    groups: &[DemandGroup],
    mode: ResponseMode,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<(RecommendationProfile, StrategyOutcome)> {
    let profile = recommend(kind, inst, groups, cfg)?;
    let outcome = if kind == StrategyKind::Cc {
        let compliant: Vec<DemandGroup> = groups
            .iter()
            .map(|g| DemandGroup {
                alpha: 1.0,
                ..g.clone()
            })
            .collect();
        simulate_response(inst, &profile, &compliant, mode, rng)?
    } else {
        simulate_response(inst, &profile, groups, mode, rng)?
    };
    Ok((profile, outcome))
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn selfish_path_argmin_and_ties() {
        assert_eq!(selfish_path(&group(0, 1.0, 0.0, &[10.0, 12.0])), 0);
        assert_eq!(selfish_path(&group(0, 1.0, 0.0, &[12.0, 10.0])), 1);
        assert_eq!(selfish_path(&group(0, 1.0, 0.0, &[7.0, 7.0, 7.0])), 0);
    }

    #[test]
    fn expected_mode_splits_by_trust() {
        let (net, paths, cs) = twin();
        let inst = Instance::new(&net, &paths, &cs).unwrap();
        let g = vec![group(3, 10.0, 0.5, &[10.0, 12.0])];
        let profile = RecommendationProfile {
            entries: vec![Recommendation {
                group: 3,
                commodity: 0,
                path: Some(1),
                amount: 10.0,
                planned_accept: 5.0,
            }],
            planned_flow: FlowVector::zeros(&net, &paths),
            reference: FlowVector::zeros(&net, &paths),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = simulate_response(&inst, &profile, &g, ResponseMode::Expected, &mut rng).unwrap();
        assert_eq!(out.realized_flow.path_flows[0], vec![5.0, 5.0]);
        assert!((out.congestion - 100.9375).abs() < 1e-9);
    }

    #[test]
    fn bernoulli_frequency_matches_trust() {
        let (net, paths, cs) = twin();
        let inst = Instance::new(&net, &paths, &cs).unwrap();
        let g = vec![group(0, 10.0, 0.5, &[10.0, 12.0])];
        let profile = RecommendationProfile {
            entries: vec![Recommendation {
                group: 0,
                commodity: 0,
                path: Some(1),
                amount: 10.0,
                planned_accept: 5.0,
            }],
            planned_flow: FlowVector::zeros(&net, &paths),
            reference: FlowVector::zeros(&net, &paths),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mut accepted = 0;
        for _ in 0..n {
            let out = simulate_response(&inst, &profile, &g, ResponseMode::Bernoulli, &mut rng).unwrap();
            if out.responses[0].accepted() {
                accepted += 1;
                assert_eq!(out.realized_flow.path_flows[0], vec![0.0, 10.0]);
            } else {
                assert_eq!(out.realized_flow.path_flows[0], vec![10.0, 0.0]);
            }
        }
        let freq = accepted as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.01, "{freq}");
    }

    #[test]
    fn extreme_trust_is_deterministic() {
        let (net, paths, cs) = twin();
        let inst = Instance::new(&net, &paths, &cs).unwrap();
        let g = vec![group(0, 4.0, 0.0, &[10.0, 12.0]), group(1, 6.0, 1.0, &[10.0, 12.0])];
        let profile = tasr_single(&inst, &g, &SolverConfig::default()).unwrap();
        for mode in [ResponseMode::Bernoulli, ResponseMode::Expected] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let out = simulate_response(&inst, &profile, &g, mode, &mut rng).unwrap();
            assert_eq!(out.responses[0].accepted_share, 0.0);
            assert_eq!(out.responses[1].accepted_share, 1.0);
            assert!(out.realized_flow.is_feasible(&[10.0], 1e-12));
        }
    }

    #[test]
    fn missing_recommendation_is_an_error() {
        let (net, paths, cs) = twin();
        let inst = Instance::new(&net, &paths, &cs).unwrap();
        let g = vec![group(0, 4.0, 0.3, &[10.0, 12.0])];
        let profile = RecommendationProfile {
            entries: vec![],
            planned_flow: FlowVector::zeros(&net, &paths),
            reference: FlowVector::zeros(&net, &paths),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(simulate_response(&inst, &profile, &g, ResponseMode::Expected, &mut rng).is_err());
        let g = vec![group(0, 4.0, 0.0, &[10.0, 12.0])];
        let out = simulate_response(&inst, &profile, &g, ResponseMode::Expected, &mut rng).unwrap();
        assert_eq!(out.realized_flow.path_flows[0], vec![4.0, 0.0]);
    }

    #[test]
    fn subflow_predicate() {
        let (net, paths, _) = twin();
        let f2 = FlowVector::from_path_flows(&net, &paths, vec![vec![5.0, 5.0]]);
        assert!(is_subflow(&f2, &f2));
        assert!(is_subflow(&FlowVector::zeros(&net, &paths), &f2));
        let f1 = FlowVector::from_path_flows(&net, &paths, vec![vec![6.0, 0.0]]);
        assert!(!is_subflow(&f1, &f2));
    }

    #[test]
    fn efficiency_ratio_of_optimum_is_one() {
        let (net, paths, cs) = twin();
        let inst = Instance::new(&net, &paths, &cs).unwrap();
        let g = vec![group(0, 10.0, 1.0, &[10.0, 10.0])];
        let cfg = SolverConfig::default();
        let opt = inst.system_optimum(&g, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, out) = run_strategy(StrategyKind::Cc, &inst, &g, ResponseMode::Bernoulli, &cfg, &mut rng).unwrap();
        assert!((efficiency_ratio(&out, opt.objective).unwrap() - 1.0).abs() < 1e-12);
        assert!(efficiency_ratio(&out, 0.0).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("tasr".parse::<StrategyKind>().unwrap(), StrategyKind::Tasr);
        assert!(matches!("greedy".parse::<StrategyKind>(), Err(Error::UnknownStrategy(_))));
    }
}
