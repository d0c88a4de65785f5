//! Regret, the fixed-step trust update and repeated interactions.

use serde::Serialize;

use crate::assign::SolverConfig;
use crate::error::{Error, Result};
use crate::harness::rng::{stream, Purpose};
use crate::strategies::{efficiency_ratio, run_strategy, DemandGroup, GroupResponse, Instance, ResponseMode, StrategyKind};

pub const DEFAULT_EPSILON: f64 = 0.25;

/// Regrets within this relative distance of zero count as zero.
const REGRET_EPS: f64 = 1e-12;

/// Realized latency of the path taken minus realized latency of the path the
/// group would have taken on its own. Negative means the recommendation paid
/// off.
pub fn regret(chosen_latency: f64, prior_best_latency: f64) -> f64 {
    chosen_latency - prior_best_latency
}

/// One fixed step against the sign of the regret, clamped to `[0, 1]`.
pub fn update_trust(alpha: f64, regret: f64, epsilon: f64) -> f64 {
    if regret < 0.0 {
        (alpha + epsilon).min(1.0)
    } else if regret > 0.0 {
        (alpha - epsilon).max(0.0)
    } else {
        alpha
    }
}

/// The path a group judges best after the fact: the argmin over paths of
/// prior weight times realized latency, first index on ties. With a flat
/// prior this is the fastest realized path; with no congestion it is the
/// prior's own argmin.
pub fn prior_best_path(prior: &[f64], path_latencies: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = prior[0] * path_latencies[0];
    for (j, (&q, &t)) in prior.iter().zip(path_latencies).enumerate().skip(1) {
        if q * t < best_score {
            best = j;
            best_score = q * t;
        }
    }
    best
}

/// Amount-weighted regret of a group's realized choice against its
/// prior-best path. Shares already on that path contribute exactly zero.
pub fn group_regret(response: &GroupResponse, prior: &[f64], path_latencies: &[f64]) -> f64 {
    let best = prior_best_path(prior, path_latencies);
    let reference = path_latencies[best];
    let total: f64 = response.chosen.iter().map(|(_, a)| a).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let b = response
        .chosen
        .iter()
        .filter(|(p, _)| *p != best)
        .map(|&(p, a)| a * regret(path_latencies[p], reference))
        .sum::<f64>()
        / total;
    if b.abs() <= REGRET_EPS * reference.abs().max(1.0) {
        0.0
    } else {
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustEvent {
    pub interaction: usize,
    pub group: usize,
    pub alpha: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustState {
    /// Trust per group, aligned with the group list it was built from.
    pub alpha: Vec<f64>,
    pub epsilon: f64,
    pub history: Vec<TrustEvent>,
}

impl TrustState {
    pub fn new(alpha: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if let Some(a) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Domain(format!("trust {a} outside [0, 1]")));
        }
        Ok(TrustState {
            alpha,
            epsilon,
            history: Vec::new(),
        })
    }

    pub fn mean(&self) -> f64 {
        if self.alpha.is_empty() {
            return 0.0;
        }
        self.alpha.iter().sum::<f64>() / self.alpha.len() as f64
    }

    /// Applies one update per group and logs it.
    pub fn apply(&mut self, interaction: usize, groups: &[usize], regrets: &[f64]) {
        for ((a, &g), &b) in self.alpha.iter_mut().zip(groups).zip(regrets) {
            *a = update_trust(*a, b, self.epsilon);
            self.history.push(TrustEvent {
                interaction,
                group: g,
                alpha: *a,
                regret: b,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTrust {
    pub group: usize,
    pub alpha_before: f64,
    pub alpha_after: f64,
    pub accepted_share: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionRecord {
    /// 1-based interaction number.
    pub interaction: usize,
    pub congestion: f64,
    pub per_unit: f64,
    pub efficiency_ratio: f64,
    pub groups: Vec<GroupTrust>,
}

impl InteractionRecord {
    pub fn mean_alpha_after(&self) -> f64 {
        self.groups.iter().map(|g| g.alpha_after).sum::<f64>() / self.groups.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrustSimulation<'a> {
    pub instance: Instance<'a>,
    pub strategy: StrategyKind,
    pub epsilon: f64,
    pub mode: ResponseMode,
    pub solver: SolverConfig,
    /// Complete-compliance objective for the groups' demand; solved on the
    /// fly when absent.
    pub optimum: Option<f64>,
}

/// Runs `interactions` rounds: each round the strategy is recomputed with the
/// current trust levels, the response is simulated, and every group updates
/// its trust from its realized regret.
pub fn repeated_interaction(
    sim: &TrustSimulation<'_>,
    groups: &[DemandGroup],
    interactions: usize,
    seed: u64,
) -> Result<(TrustState, Vec<InteractionRecord>)> {
    if interactions == 0 {
        return Err(Error::Config("interactions must be at least 1".into()));
    }
    let inst = &sim.instance;
    inst.validate_groups(groups)?;
    let mut state = TrustState::new(groups.iter().map(|g| g.alpha).collect(), sim.epsilon)?;
    let ids: Vec<usize> = groups.iter().map(|g| g.id).collect();
    let total: f64 = groups.iter().map(|g| g.amount).sum();
    let optimum = match sim.optimum {
        Some(v) => v,
        None => inst.system_optimum(groups, &sim.solver)?.objective,
    };
    let mut rng = stream(seed, Purpose::Response(sim.strategy));
    let mut current = groups.to_vec();
    let mut records = Vec::with_capacity(interactions);

    for t in 1..=interactions {
        for (g, &a) in current.iter_mut().zip(&state.alpha) {
            g.alpha = a;
        }
        let (_, outcome) = run_strategy(sim.strategy, inst, &current, sim.mode, &sim.solver, &mut rng)?;
        let latencies = outcome.realized_flow.path_latencies(inst.network, inst.paths, None);
        let regrets: Vec<f64> = current
            .iter()
            .zip(&outcome.responses)
            .map(|(g, r)| group_regret(r, &g.prior, &latencies[g.commodity]))
            .collect();
        let before = state.alpha.clone();
        state.apply(t, &ids, &regrets);
        records.push(InteractionRecord {
            interaction: t,
            congestion: outcome.congestion,
            per_unit: if total > 0.0 { outcome.congestion / total } else { 0.0 },
            efficiency_ratio: if optimum > 0.0 { efficiency_ratio(&outcome, optimum)? } else { 1.0 },
            groups: ids
                .iter()
                .enumerate()
                .map(|(k, &id)| GroupTrust {
                    group: id,
                    alpha_before: before[k],
                    alpha_after: state.alpha[k],
                    accepted_share: outcome.responses[k].accepted_share,
                    regret: regrets[k],
                })
                .collect(),
        });
    }
    Ok((state, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Commodity, Edge, Network, Path, PathSet};

    #[test]
    fn regret_examples() {
        assert_eq!(regret(12.0, 10.0), 2.0);
        assert_eq!(regret(10.0, 10.0), 0.0);
        assert_eq!(regret(9.5, 10.0), -0.5);
    }

    #[test]
    fn update_examples() {
        assert_eq!(update_trust(0.5, 3.0, 0.25), 0.25);
        assert_eq!(update_trust(0.9, -1.0, 0.25), 1.0);
        assert_eq!(update_trust(0.0, 1.0, 0.25), 0.0);
        assert_eq!(update_trust(0.5, 0.0, 0.25), 0.5);
    }

    #[test]
    fn state_rejects_bad_inputs() {
        assert!(TrustState::new(vec![0.5], 0.0).is_err());
        assert!(TrustState::new(vec![0.5], 1.5).is_err());
        assert!(TrustState::new(vec![1.5], 0.25).is_err());
    }

    #[test]
    fn group_regret_against_prior_best() {
        let r = GroupResponse {
            group: 0,
            accepted_share: 0.5,
            selfish: 0,
            chosen: vec![(0, 3.0), (1, 1.0)],
        };
        let prior = [10.0, 12.0];
        // Path 0 scores 100 against 144, so it stays the reference.
        assert!((group_regret(&r, &prior, &[10.0, 12.0]) - 0.5).abs() < 1e-12);
        let stay = GroupResponse {
            chosen: vec![(0, 3.0)],
            ..r.clone()
        };
        assert_eq!(group_regret(&stay, &prior, &[10.1, 12.0]), 0.0);
        // Congestion on path 0 (10 * 15 = 150 > 12 * 12 = 144) makes path 1
        // the prior-best: the followers gain, the stayers lose.
        assert_eq!(prior_best_path(&prior, &[15.0, 12.0]), 1);
        assert!((group_regret(&r, &prior, &[15.0, 12.0]) - 3.0 * 3.0 / 4.0).abs() < 1e-12);
        assert!((group_regret(&stay, &prior, &[15.0, 12.0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn prior_best_ties_take_first_index() {
        assert_eq!(prior_best_path(&[1.0, 1.0, 1.0], &[5.0, 4.0, 4.0]), 1);
        assert_eq!(prior_best_path(&[2.0, 1.0], &[1.0, 2.0]), 0);
    }

    #[test]
    fn fully_trusting_groups_on_twin_link() {
        let net = Network::new(vec![Edge::bpr(1, 2, 10.0, 10.0), Edge::bpr(1, 2, 10.0, 10.0)]).unwrap();
        let paths = PathSet::new(vec![vec![Path::new(vec![0]), Path::new(vec![1])]]).unwrap();
        let cs = [Commodity::new(1, 2, 0.0)];
        let sim = TrustSimulation {
            instance: Instance::new(&net, &paths, &cs).unwrap(),
            strategy: StrategyKind::Tasr,
            epsilon: 0.25,
            mode: ResponseMode::Bernoulli,
            solver: SolverConfig::default(),
            optimum: None,
        };
        let groups = vec![DemandGroup::new(0, 0, 10.0, 1.0, vec![10.0, 10.0])];
        let (state, records) = repeated_interaction(&sim, &groups, 5, 7).unwrap();
        assert_eq!(records.len(), 5);
        assert_eq!(state.history.len(), 5);
        assert!(state.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
        assert!(repeated_interaction(&sim, &groups, 0, 7).is_err());
    }
}
