use std::cmp::Ordering;

use super::{selfish_path, sort_by_trust, DemandGroup, Instance, Recommendation, RecommendationProfile, RESIDUAL_EPS};
use crate::assign::{solve_cc, SolverConfig};
use crate::error::{Error, Result};
use crate::latency::FlowVector;
use crate::net::Commodity;

struct CommodityPlan {
    entries: Vec<Recommendation>,
    planned: Vec<f64>,
    reference: Vec<f64>,
}

/// Greedy plan for one commodity on top of fixed `background` edge loads.
fn plan_commodity(
    inst: &Instance<'_>,
    commodity: usize,
    groups: &[DemandGroup],
    cfg: &SolverConfig,
    background: Option<&[f64]>,
) -> Result<CommodityPlan> {
    let paths = inst.paths.select(&[commodity]);
    let n = paths.commodity(0).len();
    let total: f64 = groups.iter().map(|g| g.amount).sum();
    let c = &inst.commodities[commodity];
    let demand = [Commodity::new(c.source, c.destination, total)];
    let opt = solve_cc(inst.network, &paths, &demand, cfg, background)?;
    let target = opt.flows.path_flows[0].clone();

    let latency = opt.flows.path_latencies(inst.network, &paths, background).remove(0);
    let mut order: Vec<usize> = (0..n).filter(|&j| target[j] > 0.0).collect();
    order.sort_by(|&a, &b| latency[a].total_cmp(&latency[b]).then(a.cmp(&b)));

    let mut sorted = groups.to_vec();
    sort_by_trust(&mut sorted);

    let eps = RESIDUAL_EPS * total.max(1.0);
    let mut planned = vec![0.0; n];
    let mut entries = Vec::new();
    let push = |entries: &mut Vec<Recommendation>, g: &DemandGroup, path, amount, accept| {
        entries.push(Recommendation {
            group: g.id,
            commodity,
            path: Some(path),
            amount,
            planned_accept: accept,
        })
    };

    for g in &sorted {
        let selfish = selfish_path(g);
        if g.is_noncompliant() {
            planned[selfish] += g.amount;
            push(&mut entries, g, selfish, g.amount, 0.0);
            continue;
        }
        let mut remaining = g.amount;
        for &p in &order {
            if remaining <= eps {
                break;
            }
            let residual = target[p] - planned[p];
            if residual <= eps {
                continue;
            }
            // Flow consumed on `p` per unit of group recommended there.
            let per_unit = if g.is_compliant() || p == selfish { 1.0 } else { g.alpha };
            let x = remaining.min(residual / per_unit);
            planned[p] += g.alpha * x;
            planned[selfish] += (1.0 - g.alpha) * x;
            push(&mut entries, g, p, x, g.alpha * x);
            remaining -= x;
        }
        if remaining > eps {
            // Only reachable through rounding: the residuals always cover the
            // unassigned demand.
            debug_assert!(remaining <= 1e-6 * total.max(1.0), "{remaining} left over");
            let p = *order.last().ok_or_else(|| Error::Domain("optimum routes no flow".into()))?;
            planned[p] += g.alpha * remaining;
            planned[selfish] += (1.0 - g.alpha) * remaining;
            push(&mut entries, g, p, remaining, g.alpha * remaining);
        } else if remaining > 0.0 {
            if let Some(last) = entries.last_mut().filter(|r| r.group == g.id) {
                last.amount += remaining;
                last.planned_accept += g.alpha * remaining;
            }
        }
    }
    Ok(CommodityPlan {
        entries,
        planned,
        reference: target,
    })
}

fn assemble(inst: &Instance<'_>, plans: Vec<(usize, CommodityPlan)>) -> RecommendationProfile {
    let mut planned: Vec<Vec<f64>> = inst.paths.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut reference = planned.clone();
    let mut entries = Vec::new();
    for (i, plan) in plans {
        planned[i] = plan.planned;
        reference[i] = plan.reference;
        entries.extend(plan.entries);
    }
    RecommendationProfile {
        entries,
        planned_flow: FlowVector::from_path_flows(inst.network, inst.paths, planned),
        reference: FlowVector::from_path_flows(inst.network, inst.paths, reference),
    }
}

/// Single-commodity greedy trust-aware routing.
pub fn tasr_single(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    if inst.paths.num_commodities() != 1 {
        return Err(Error::Domain(format!(
            "single-commodity routing given {} commodities",
            inst.paths.num_commodities()
        )));
    }
    inst.validate_groups(groups)?;
    let plan = plan_commodity(inst, 0, groups, cfg, None)?;
    Ok(assemble(inst, vec![(0, plan)]))
}

/// Multi-commodity greedy trust-aware routing: commodities are planned in
/// descending order of noncompliant share, each on top of the planned flow of
/// the ones before it.
pub fn tasr_multi(inst: &Instance<'_>, groups: &[DemandGroup], cfg: &SolverConfig) -> Result<RecommendationProfile> {
    inst.validate_groups(groups)?;
    let m = inst.paths.num_commodities();
    if m == 0 {
        return Err(Error::Domain("no commodities to route".into()));
    }
    let mut per: Vec<Vec<DemandGroup>> = vec![Vec::new(); m];
    for g in groups {
        per[g.commodity].push(g.clone());
    }
    let order = commodity_order(&per);

    let mut background = vec![0.0; inst.network.num_edges()];
    let mut plans = Vec::with_capacity(m);
    for i in order {
        if per[i].iter().map(|g| g.amount).sum::<f64>() <= 0.0 {
            continue;
        }
        let bg = if background.iter().any(|&b| b > 0.0) { Some(background.as_slice()) } else { None };
        let plan = plan_commodity(inst, i, &per[i], cfg, bg)?;
        for (p, &f) in inst.paths.commodity(i).iter().zip(&plan.planned) {
            for &e in &p.edges {
                background[e] += f;
            }
        }
        plans.push((i, plan));
    }
    Ok(assemble(inst, plans))
}

/// Descending noncompliant fraction, then larger demand, then index.
/// Fractions and demands within 1e-9 relative count as equal.
pub(crate) fn commodity_order(per: &[Vec<DemandGroup>]) -> Vec<usize> {
    let stats: Vec<(f64, f64)> = per
        .iter()
        .map(|gs| {
            let total: f64 = gs.iter().map(|g| g.amount).sum();
            let nc: f64 = gs.iter().filter(|g| g.is_noncompliant()).map(|g| g.amount).sum();
            (if total > 0.0 { nc / total } else { 0.0 }, total)
        })
        .collect();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
    let mut order: Vec<usize> = (0..per.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, ra) = stats[a];
        let (fb, rb) = stats[b];
        if !close(fa, fb) {
            return fb.total_cmp(&fa);
        }
        if !close(ra, rb) {
            return rb.total_cmp(&ra);
        }
        Ordering::Equal
    });
    order
}
