//! Side-by-side benchmark of the exact search and the heuristic under equal
//! budgets. Both solvers consume the same tightened root relaxation, and
//! their gaps are measured against that shared bound, so the comparison is
//! about search quality, not about who tightened better.
//!
//! With `cycles` set the whole run is deterministic (node budgets, logical
//! timestamps) and reported times are zeroed, which makes the CSV and trace
//! output byte-reproducible.

use crate::heuristic::{run_with_root, HeuristicConfig, HeuristicError, TraceEvent};
use crate::instance::BanInstance;
use crate::lp::{strengthen, LpError, LpStatus};
use crate::mip::{solve_mip_with_root, FixMask, MipError, MipLimits};
use crate::model::{build_rob_band_ilp, ModelError};
use crate::par;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Wall-clock budget per solver per instance, in seconds.
    pub time_limit: f64,
    /// Deterministic mode: heuristic cycle count (disables wall clocks).
    pub cycles: Option<u64>,
    /// Node budget for the exact search (required in deterministic mode).
    pub mip_nodes: Option<u64>,
    /// Template for the heuristic side; its `time_limit` and `cycles` fields
    /// are overridden per the settings above.
    pub heuristic: HeuristicConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            time_limit: 300.0,
            cycles: None,
            mip_nodes: None,
            heuristic: HeuristicConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub id: String,
    pub gap_mip_pct: Option<f64>,
    pub gap_heu_pct: Option<f64>,
    pub delta_gap_pct: Option<f64>,
    pub time_mip_s: f64,
    pub time_heu_s: f64,
    pub status: String,
    /// Heuristic event log for this instance (not part of the CSV).
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
}

/// Percentage gap of a primal value over a lower bound.
fn gap_pct(value: f64, bound: f64) -> f64 {
    if value > 0.0 {
        100.0 * (value - bound) / value
    } else {
        0.0
    }
}

fn bench_one(id: &str, instance: &BanInstance, config: &BenchConfig) -> Result<BenchRow, BenchError> {
    let deterministic = config.cycles.is_some();
    let model = build_rob_band_ilp(instance);
    // Shared tightening, outside both solver budgets.
    let (root, root_sol) = strengthen(model.problem(), config.heuristic.cut_rounds)?;
    if root_sol.status != LpStatus::Optimal {
        return Ok(BenchRow {
            id: id.to_string(),
            gap_mip_pct: None,
            gap_heu_pct: None,
            delta_gap_pct: None,
            time_mip_s: 0.0,
            time_heu_s: 0.0,
            status: "relaxation_infeasible".to_string(),
            trace: Vec::new(),
        });
    }
    let bound = root_sol.objective;

    let mip_limits = if deterministic {
        MipLimits { time: None, nodes: Some(config.mip_nodes.unwrap_or(10_000)) }
    } else {
        MipLimits { time: Some(config.time_limit), nodes: config.mip_nodes }
    };
    let free = vec![FixMask::Free; model.layout.num_binaries()];
    let t0 = Instant::now();
    let mip = solve_mip_with_root(&model, &root, &free, &mip_limits, None)?;
    let time_mip_s = if deterministic { 0.0 } else { t0.elapsed().as_secs_f64() };

    let mut hcfg = config.heuristic.clone();
    hcfg.time_limit = config.time_limit;
    hcfg.cycles = config.cycles;
    let t0 = Instant::now();
    let heu = run_with_root(&model, &root, &root_sol, &hcfg)?;
    let time_heu_s = if deterministic { 0.0 } else { t0.elapsed().as_secs_f64() };

    let gap_mip_pct = mip.objective.map(|v| gap_pct(v, bound));
    let gap_heu_pct = heu.best_value.map(|v| gap_pct(v, bound));
    let delta_gap_pct = match (gap_mip_pct, gap_heu_pct) {
        (Some(gm), Some(gh)) if gm > 0.0 => Some(100.0 * (gm - gh) / gm),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    let status = format!(
        "{:?}/{}",
        mip.status,
        if heu.best_value.is_some() { "Feasible" } else { "NoSolution" }
    );
    Ok(BenchRow {
        id: id.to_string(),
        gap_mip_pct,
        gap_heu_pct,
        delta_gap_pct,
        time_mip_s,
        time_heu_s,
        status,
        trace: heu.trace,
    })
}

/// Benchmarks every `(id, instance)` pair and returns one row per instance,
/// ordered by id.
pub fn run_bench(
    instances: &[(String, BanInstance)],
    config: &BenchConfig,
) -> Result<Vec<BenchRow>, BenchError> {
    let items: Vec<(String, BanInstance)> = instances.to_vec();
    let results = par::map_ordered(items, |(id, inst)| bench_one(&id, &inst, config));
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(rows)
}

fn opt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Renders rows as CSV. Missing gaps print as empty fields; times are
/// whatever the rows carry (zeros in deterministic mode), with millisecond
/// precision.
pub fn csv_string(rows: &[BenchRow]) -> String {
    let mut out = String::from("id,gap_mip_pct,gap_heu_pct,delta_gap_pct,time_mip_s,time_heu_s,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{}\n",
            r.id,
            opt4(r.gap_mip_pct),
            opt4(r.gap_heu_pct),
            opt4(r.delta_gap_pct),
            r.time_mip_s,
            r.time_heu_s,
            r.status
        ));
    }
    out
}

/// Renders the heuristic event logs as tab-separated lines
/// (`id`, timestamp, event, value), rows in id order.
pub fn trace_text(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    for r in rows {
        for e in &r.trace {
            out.push_str(&format!("{}\t{:.3}\t{}\t{:.9e}\n", r.id, e.t, e.kind, e.value));
        }
    }
    out
}
