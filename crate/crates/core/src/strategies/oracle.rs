//! Exhaustive search over recommendation profiles on tiny instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{selfish_path, simulate_response, DemandGroup, Instance, Recommendation, RecommendationProfile, ResponseMode};
use crate::assign::SolverConfig;
use crate::error::{Error, Result};
use crate::latency::{edge_congestion, FlowVector};

/// Largest number of profiles [`exact_best_response`] will enumerate.
pub const ORACLE_PROFILE_LIMIT: f64 = 1e6;

/// Congestion of the deterministic expected-mode response to `profile`.
pub fn expected_congestion(inst: &Instance<'_>, profile: &RecommendationProfile, groups: &[DemandGroup]) -> Result<f64> {
    // Expected mode draws no random numbers; the generator is a placeholder.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(simulate_response(inst, profile, groups, ResponseMode::Expected, &mut rng)?.congestion)
}

/// The profile that recommends one path per group and minimizes
/// expected-mode congestion, by enumerating every combination. Groups with
/// zero trust cannot be influenced and are not enumerated. Among equal
/// minima the lexicographically smallest profile (in group order) wins.
pub fn exact_best_response(
    inst: &Instance<'_>,
    groups: &[DemandGroup],
    cfg: &SolverConfig,
) -> Result<(RecommendationProfile, f64)> {
    inst.validate_groups(groups)?;
    let free: Vec<usize> = (0..groups.len()).filter(|&i| !groups[i].is_noncompliant()).collect();
    let radix: Vec<usize> = free.iter().map(|&i| inst.paths.commodity(groups[i].commodity).len()).collect();
    let profiles: f64 = radix.iter().map(|&r| r as f64).product();
    if profiles > ORACLE_PROFILE_LIMIT {
        return Err(Error::TooLarge {
            profiles,
            limit: ORACLE_PROFILE_LIMIT,
        });
    }

    let selfish: Vec<usize> = groups.iter().map(selfish_path).collect();
    let mut base = FlowVector::zeros(inst.network, inst.paths);
    for (g, &s) in groups.iter().zip(&selfish) {
        let stay = if g.is_noncompliant() { g.amount } else { (1.0 - g.alpha) * g.amount };
        base.add_path_flow(inst.paths, g.commodity, s, stay);
    }

    let evaluate = |choice: &[usize]| {
        let mut edges = base.edge_flows.clone();
        for (k, &i) in free.iter().enumerate() {
            let g = &groups[i];
            for &e in &inst.paths.commodity(g.commodity)[choice[k]].edges {
                edges[e] += g.alpha * g.amount;
            }
        }
        edge_congestion(inst.network, &edges)
    };

    let mut choice = vec![0usize; free.len()];
    let mut best = choice.clone();
    let mut best_value = evaluate(&choice);
    'outer: loop {
        // Odometer increment, last digit fastest, so profiles are visited in
        // lexicographic order.
        let mut k = choice.len();
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < radix[k] {
                break;
            }
            choice[k] = 0;
        }
        let v = evaluate(&choice);
        if v < best_value {
            best_value = v;
            best.clone_from(&choice);
        }
    }

    let mut entries = Vec::with_capacity(groups.len());
    let mut planned = base;
    let mut slot = 0;
    for (i, g) in groups.iter().enumerate() {
        let (path, accept) = if free.get(slot) == Some(&i) {
            slot += 1;
            (best[slot - 1], g.alpha * g.amount)
        } else {
            (selfish[i], 0.0)
        };
        if accept > 0.0 {
            planned.add_path_flow(inst.paths, g.commodity, path, accept);
        }
        entries.push(Recommendation {
            group: g.id,
            commodity: g.commodity,
            path: Some(path),
            amount: g.amount,
            planned_accept: accept,
        });
    }
    let reference = inst.system_optimum(groups, cfg)?.flows;
    Ok((
        RecommendationProfile {
            entries,
            planned_flow: planned,
            reference,
        },
        best_value,
    ))
}

/// Cuts every group along its entries in `profile`, one new group per entry,
/// and relabels the profile to refer to the new groups. A profile that sends
/// a group down several paths becomes a single-path profile over the finer
/// groups, so it can be compared with [`exact_best_response`] on them.
pub fn split_by_profile(
    profile: &RecommendationProfile,
    groups: &[DemandGroup],
) -> Result<(Vec<DemandGroup>, RecommendationProfile)> {
    let mut parts = Vec::with_capacity(profile.entries.len());
    let mut entries = Vec::with_capacity(profile.entries.len());
    for g in groups {
        let mine: Vec<&Recommendation> = profile.for_group(g.id).collect();
        let covered: f64 = mine.iter().map(|r| r.amount).sum();
        if mine.is_empty() || (covered - g.amount).abs() > 1e-9 * g.amount.max(1.0) {
            return Err(Error::Domain(format!(
                "group {} is covered by {covered} of {} in the profile",
                g.id, g.amount
            )));
        }
        for r in mine {
            if r.path.is_none() && !g.is_noncompliant() {
                return Err(Error::Domain(format!("group {} has an entry without a path", g.id)));
            }
            let id = parts.len();
            parts.push(DemandGroup {
                id,
                amount: r.amount,
                ..g.clone()
            });
            entries.push(Recommendation { group: id, ..r.clone() });
        }
    }
    Ok((
        parts,
        RecommendationProfile {
            entries,
            planned_flow: profile.planned_flow.clone(),
            reference: profile.reference.clone(),
        },
    ))
}
