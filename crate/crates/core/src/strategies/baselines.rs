//! Baseline Stackelberg strategies. Groups with trust at or above
//! [`COMPLIANCE_CUT`] are planned as if they always comply; the rest are left
//! to their own choice.

use super::{selfish_path, DemandGroup, Instance, Recommendation, RecommendationProfile, RESIDUAL_EPS};
use crate::assign::{solve_cc, SolverConfig};
use crate::error::Result;
use crate::latency::FlowVector;
use crate::net::Commodity;

pub const COMPLIANCE_CUT: f64 = 0.5;

struct Split<'g> {
    compliant: Vec<&'g DemandGroup>,
    others: Vec<&'g DemandGroup>,
}

impl Split<'_> {
    fn compliant_total(&self) -> f64 {
        self.compliant.iter().map(|g| g.amount).sum()
    }

    fn total(&self) -> f64 {
        self.compliant_total() + self.others.iter().map(|g| g.amount).sum::<f64>()
    }

    /// Compliant fraction of the commodity's demand.
    fn mu(&self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            self.compliant_total() / total
        } else {
            0.0
        }
    }
}

fn split_by_commodity<'g>(m: usize, groups: &'g [DemandGroup], cut: f64) -> Vec<Split<'g>> {
    let mut sorted: Vec<&DemandGroup> = groups.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.id.cmp(&b.id)));
    let mut out: Vec<Split> = (0..m)
        .map(|_| Split {
            compliant: Vec::new(),
            others: Vec::new(),
        })
        .collect();
    for g in sorted {
        if g.alpha >= cut {
            out[g.commodity].compliant.push(g);
        } else {
            out[g.commodity].others.push(g);
        }
    }
    out
}

/// Assembles a profile from compliant entries; groups below the cut get a
/// single hands-off entry.
fn finish(
    inst: &Instance<'_>,
    splits: &[Split<'_>],
    mut entries: Vec<Recommendation>,
    reference: FlowVector,
) -> RecommendationProfile {
    let mut planned: Vec<Vec<f64>> = inst.paths.iter().map(|p| vec![0.0; p.len()]).collect();
    for r in &entries {
        if let Some(p) = r.path {
            planned[r.commodity][p] += r.amount;
        }
    }
    for (i, s) in splits.iter().enumerate() {
        for g in &s.others {
            planned[i][selfish_path(g)] += g.amount;
            entries.push(Recommendation {
                group: g.id,
                commodity: i,
                path: None,
                amount: g.amount,
                planned_accept: 0.0,
            });
        }
    }
    RecommendationProfile {
        entries,
        planned_flow: FlowVector::from_path_flows(inst.network, inst.paths, planned),
        reference,
    }
}

/// Splits every compliant group of commodity `i` across paths in proportion
/// to `weights`.
fn proportional(i: usize, split: &Split<'_>, weights: &[f64], entries: &mut Vec<Recommendation>) {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return;
    }
    for g in &split.compliant {
        for (j, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                let amount = g.amount * w / total;
                entries.push(Recommendation {
                    group: g.id,
                    commodity: i,
                    path: Some(j),
                    amount,
                    planned_accept: amount,
                });
            }
        }
    }
}

/// Caps `desired` at `caps` and spreads the overflow over the remaining
/// headroom in proportion to it.
fn cap_and_redistribute(desired: &[f64], caps: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = desired.iter().zip(caps).map(|(d, c)| d.min(*c)).collect();
    let overflow: f64 = desired.iter().zip(&x).map(|(d, x)| d - x).sum();
    let headroom: Vec<f64> = caps.iter().zip(&x).map(|(c, x)| c - x).collect();
    let room: f64 = headroom.iter().sum();
    if overflow > 0.0 && room > 0.0 {
        let share = (overflow / room).min(1.0);
        for (x, h) in x.iter_mut().zip(&headroom) {
            *x += share * h;
        }
    }
    x
}

/// All groups follow the optimum, split in proportion to its path flows.
pub fn cc(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    inst.validate_groups(groups)?;
    let opt = inst.system_optimum(groups, cfg)?;
    let splits = split_by_commodity(inst.paths.num_commodities(), groups, f64::NEG_INFINITY);
    let mut entries = Vec::new();
    for (i, s) in splits.iter().enumerate() {
        proportional(i, s, &opt.flows.path_flows[i], &mut entries);
    }
    Ok(finish(inst, &splits, entries, opt.flows))
}

/// Largest latency first: compliant groups fill the optimum's paths from the
/// slowest down, each up to its optimal flow.
pub fn llf(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    inst.validate_groups(groups)?;
    let opt = inst.system_optimum(groups, cfg)?;
    let latency = opt.flows.path_latencies(inst.network, inst.paths, None);
    let splits = split_by_commodity(inst.paths.num_commodities(), groups, COMPLIANCE_CUT);
    let mut entries = Vec::new();
    for (i, s) in splits.iter().enumerate() {
        let target = &opt.flows.path_flows[i];
        let lat = &latency[i];
        let mut order: Vec<usize> = (0..target.len()).filter(|&j| target[j] > 0.0).collect();
        order.sort_by(|&a, &b| lat[b].total_cmp(&lat[a]).then(b.cmp(&a)));
        let eps = RESIDUAL_EPS * s.total().max(1.0);
        let mut filled = vec![0.0; target.len()];
        for g in &s.compliant {
            let mut remaining = g.amount;
            for &p in &order {
                if remaining <= eps {
                    break;
                }
                let x = remaining.min(target[p] - filled[p]);
                if x <= eps {
                    continue;
                }
                filled[p] += x;
                remaining -= x;
                entries.push(Recommendation {
                    group: g.id,
                    commodity: i,
                    path: Some(p),
                    amount: x,
                    planned_accept: x,
                });
            }
            if remaining > 0.0 {
                if let Some(last) = entries.last_mut().filter(|r| r.group == g.id) {
                    last.amount += remaining;
                    last.planned_accept += remaining;
                }
            }
        }
    }
    Ok(finish(inst, &splits, entries, opt.flows))
}

/// Each compliant group is spread over the optimum's paths in proportion
/// to the optimal path flows.
pub fn scale(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    inst.validate_groups(groups)?;
    let opt = inst.system_optimum(groups, cfg)?;
    let splits = split_by_commodity(inst.paths.num_commodities(), groups, COMPLIANCE_CUT);
    let mut entries = Vec::new();
    for (i, s) in splits.iter().enumerate() {
        proportional(i, s, &opt.flows.path_flows[i], &mut entries);
    }
    Ok(finish(inst, &splits, entries, opt.flows))
}

/// `1 + sqrt(1 - mu)` for compliant fraction `mu`.
pub fn ascale_rho(mu: f64) -> f64 {
    1.0 + (1.0 - mu.clamp(0.0, 1.0)).sqrt()
}

/// Like [`scale`], but the path weights come from the optimum for demand
/// inflated by [`ascale_rho`] and rounded to an integer. The compliant plan
/// is then capped at the unscaled optimum, with any excess moved to paths
/// that still have room.
pub fn ascale(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    inst.validate_groups(groups)?;
    let opt = inst.system_optimum(groups, cfg)?;
    let m = inst.paths.num_commodities();
    let splits = split_by_commodity(m, groups, COMPLIANCE_CUT);
    let scaled: Vec<Commodity> = inst
        .demands(groups)
        .into_iter()
        .zip(&splits)
        .map(|(c, s)| Commodity::new(c.source, c.destination, (ascale_rho(s.mu()) * c.demand).round()))
        .collect();
    let inflated = solve_cc(inst.network, inst.paths, &scaled, cfg, None)?;

    let mut entries = Vec::new();
    for (i, s) in splits.iter().enumerate() {
        let compliant = s.compliant_total();
        let weights = &inflated.flows.path_flows[i];
        let wsum: f64 = weights.iter().sum();
        let base = if wsum > 0.0 { weights } else { &opt.flows.path_flows[i] };
        let bsum: f64 = base.iter().sum();
        if bsum <= 0.0 || compliant <= 0.0 {
            continue;
        }
        let desired: Vec<f64> = base.iter().map(|w| compliant * w / bsum).collect();
        let plan = cap_and_redistribute(&desired, &opt.flows.path_flows[i]);
        proportional(i, s, &plan, &mut entries);
    }
    Ok(finish(inst, &splits, entries, opt.flows))
}

/// Optimum for the compliant demand alone; the rest of the traffic is
/// ignored when planning.
pub fn aloof(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    inst.validate_groups(groups)?;
    let opt = inst.system_optimum(groups, cfg)?;
    let splits = split_by_commodity(inst.paths.num_commodities(), groups, COMPLIANCE_CUT);
    let reduced: Vec<Commodity> = inst
        .demands(groups)
        .into_iter()
        .zip(&splits)
        .map(|(c, s)| Commodity::new(c.source, c.destination, s.mu() * c.demand))
        .collect();
    let mut entries = Vec::new();
    if reduced.iter().any(|c| c.demand > 0.0) {
        let partial = solve_cc(inst.network, inst.paths, &reduced, cfg, None)?;
        for (i, s) in splits.iter().enumerate() {
            proportional(i, s, &partial.flows.path_flows[i], &mut entries);
        }
    }
    Ok(finish(inst, &splits, entries, opt.flows))
}
