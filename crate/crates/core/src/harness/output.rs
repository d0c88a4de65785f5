//! CSV and JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path as FsPath;

use serde::Serialize;

use super::{ExperimentConfig, OptimumInfo, PriorKind, ResultRecord, Scenario, TrustClass};
use crate::assign::SolverConfig;
use crate::error::{Error, Result};
use crate::strategies::{ResponseMode, StrategyKind};

/// Six significant digits in the shortest of fixed or scientific notation,
/// trailing zeros removed (like C's `%g`).
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// The value as it appears in the CSV.
fn printed(x: f64) -> f64 {
    format_float(x).parse().expect("formatted float parses")
}

fn header(groups: usize) -> String {
    let mut cols: Vec<String> = ["strategy", "seed", "interaction", "congestion", "per_unit_tt", "efficiency_ratio", "runtime_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 0..groups {
        for name in ["group_id", "alpha_before", "alpha_after", "accepted", "regret"] {
            cols.push(format!("{name}_{k}"));
        }
    }
    cols.join(",")
}

/// One header line and one row per record.
pub fn write_csv<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Data("no records to write".into()));
    }
    let groups = records.iter().map(|r| r.groups.len()).max().unwrap_or(0);
    writeln!(out, "{}", header(groups))?;
    for r in records {
        let mut row = vec![
            r.strategy.to_string(),
            r.seed.to_string(),
            r.interaction.to_string(),
            format_float(r.congestion),
            format_float(r.per_unit_tt),
            format_float(r.efficiency_ratio),
            r.runtime_s.map_or_else(|| "NA".to_string(), format_float),
        ];
        for k in 0..groups {
            match r.groups.get(k) {
                Some(g) => row.extend([
                    g.group.to_string(),
                    format_float(g.alpha_before),
                    format_float(g.alpha_after),
                    format_float(g.accepted_share),
                    format_float(g.regret),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ResultRecord], path: &FsPath) -> Result<()> {
    write_csv(records, BufWriter::new(File::create(path)?))
}

/// Long format: one row per (seed, strategy, interaction, group).
pub fn write_trajectory_csv<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Data("no records to write".into()));
    }
    writeln!(out, "seed,strategy,interaction,group,alpha,regret,accepted")?;
    for r in records {
        for g in &r.groups {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.seed,
                r.strategy,
                r.interaction,
                g.group,
                format_float(g.alpha_after),
                format_float(g.regret),
                format_float(g.accepted_share)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn emit_trajectory_csv(records: &[ResultRecord], path: &FsPath) -> Result<()> {
    write_trajectory_csv(records, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for a single value.
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub strategy: StrategyKind,
    pub interaction: usize,
    pub n: usize,
    pub congestion: Stat,
    pub per_unit_tt: Stat,
    pub efficiency_ratio: Stat,
    pub mean_alpha_after: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumSummary {
    pub all_converged: bool,
    pub max_relative_gap: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub generator: String,
    pub network_edges: usize,
    pub candidate_commodities: usize,
    pub total_demand: f64,
    pub delta: f64,
    pub seeds: usize,
    pub base_seed: u64,
    pub interactions: usize,
    pub epsilon: f64,
    pub response_mode: ResponseMode,
    pub prior: PriorKind,
    pub k_paths: usize,
    pub trust_classes: Vec<TrustClass>,
    pub share_rule: String,
    pub partition_rule: String,
    pub compliance_cut: f64,
    pub solver: SolverConfig,
    pub rng: String,
    pub optimum: OptimumSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub metadata: Metadata,
    pub aggregates: Vec<Aggregate>,
}

impl Summary {
    pub fn find(&self, strategy: StrategyKind, interaction: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.strategy == strategy && a.interaction == interaction)
    }
}

/// Means and sample deviations per (strategy, interaction), computed from
/// the values exactly as they are printed in the CSV so that the CSV alone
/// reproduces them.
pub fn summarize(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    records: &[ResultRecord],
    optima: &[OptimumInfo],
) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::Data("no records to aggregate".into()));
    }
    let mut aggregates = Vec::new();
    for &strategy in &cfg.strategies {
        for interaction in 1..=cfg.interactions {
            let rows: Vec<&ResultRecord> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.interaction == interaction)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let col = |f: &dyn Fn(&ResultRecord) -> f64| Stat::of(&rows.iter().map(|r| printed(f(r))).collect::<Vec<_>>());
            let alpha = |r: &ResultRecord| {
                let n = r.groups.len().max(1) as f64;
                r.groups.iter().map(|g| printed(g.alpha_after)).sum::<f64>() / n
            };
            aggregates.push(Aggregate {
                strategy,
                interaction,
                n: rows.len(),
                congestion: col(&|r| r.congestion),
                per_unit_tt: col(&|r| r.per_unit_tt),
                efficiency_ratio: col(&|r| r.efficiency_ratio),
                mean_alpha_after: Stat::of(&rows.iter().map(|r| alpha(r)).collect::<Vec<_>>()),
            });
        }
    }
    let metadata = Metadata {
        generator: format!("tasr-core {}", env!("CARGO_PKG_VERSION")),
        network_edges: scenario.network.num_edges(),
        candidate_commodities: scenario.commodities.len(),
        total_demand: scenario.total_demand(cfg.delta),
        delta: cfg.delta,
        seeds: cfg.seeds,
        base_seed: cfg.base_seed,
        interactions: cfg.interactions,
        epsilon: cfg.epsilon,
        response_mode: cfg.response_mode,
        prior: cfg.prior,
        k_paths: cfg.k_paths,
        trust_classes: cfg.trust_classes.clone(),
        share_rule: "zero and full trust take 1/6 of demand each; the remaining 2/3 is split evenly over the partial classes"
            .into(),
        partition_rule: format!(
            "multi-commodity runs cut each trust class into {} equal parts, each assigned to a uniformly random commodity",
            cfg.groups_per_class
        ),
        compliance_cut: crate::strategies::COMPLIANCE_CUT,
        solver: cfg.solver,
        rng: "ChaCha8 seeded with base_seed + i; stream 1 for demand partition, stream 16 + strategy index for responses"
            .into(),
        optimum: OptimumSummary {
            all_converged: optima.iter().all(|o| o.converged),
            max_relative_gap: optima.iter().map(|o| o.relative_gap).fold(0.0, f64::max),
            max_iterations: optima.iter().map(|o| o.iterations).max().unwrap_or(0),
        },
    };
    Ok(Summary { metadata, aggregates })
}

pub fn write_summary_json<W: Write>(summary: &Summary, mut out: W) -> Result<()> {
    if summary.aggregates.is_empty() {
        return Err(Error::Data("empty aggregate".into()));
    }
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn emit_summary_json(summary: &Summary, path: &FsPath) -> Result<()> {
    write_summary_json(summary, BufWriter::new(File::create(path)?))
}
