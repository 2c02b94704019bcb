//! Closed loop: simulate, recommend, apply each recommendation (and all of
//! them together), then simulate again.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, SimConfig};
use super::engine::{run, PerfSummary};
use super::optimize::{apply_all, apply_optimization, OptimizeError};
use crate::model::{Recommendation, RecommendationKind, Thresholds};
use crate::recommend::analyze_log;

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopLeg {
    /// `baseline`, a recommendation kind, or `all`.
    pub label: String,
    pub applied: Vec<RecommendationKind>,
    pub perf: PerfSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub recommendations: Vec<Recommendation>,
    /// Baseline first, then one leg per recommendation, then `all` when more than one fired.
    pub legs: Vec<LoopLeg>,
}

impl LoopReport {
    pub fn baseline(&self) -> &PerfSummary {
        &self.legs[0].perf
    }

    pub fn leg(&self, label: &str) -> Option<&LoopLeg> {
        self.legs.iter().find(|l| l.label == label)
    }
}

pub fn closed_loop(cfg: &SimConfig, t: &Thresholds) -> Result<LoopReport, LoopError> {
    let (log, base) = run(cfg)?;
    let (_, analysis) = analyze_log(&log, t);
    let recs = analysis.recommendations;

    let mut plans: Vec<(String, Vec<RecommendationKind>, SimConfig)> = Vec::new();
    for r in &recs {
        plans.push((r.kind.to_string(), vec![r.kind], apply_optimization(cfg, r)?));
    }
    if recs.len() > 1 {
        plans.push(("all".into(), recs.iter().map(|r| r.kind).collect(), apply_all(cfg, &recs)?));
    }
    // legs share nothing, so they run side by side
    let results: Vec<Result<PerfSummary, ConfigError>> = std::thread::scope(|s| {
        let handles: Vec<_> = plans.iter().map(|(_, _, c)| s.spawn(move || run(c).map(|(_, p)| p))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation leg panicked")).collect()
    });
    let mut legs = vec![LoopLeg {
        label: "baseline".into(),
        applied: Vec::new(),
        perf: base,
    }];
    for ((label, applied, _), perf) in plans.into_iter().zip(results) {
        legs.push(LoopLeg {
            label,
            applied,
            perf: perf?,
        });
    }
    Ok(LoopReport {
        recommendations: recs,
        legs,
    })
}

fn rel(new: f64, old: f64) -> String {
    if old == 0.0 {
        "n/a".into()
    } else {
        format!("{:+.1}%", 100.0 * (new - old) / old)
    }
}

/// Markdown comparison table, one row per leg.
pub fn render_loop_table(r: &LoopReport) -> String {
    let base = r.baseline();
    let mut o = String::new();
    let _ = writeln!(
        o,
        "| leg | success rate | throughput (tps) | avg latency (ms) | mvcc | phantom | endorsement | early aborted | success vs baseline | throughput vs baseline |"
    );
    let _ = writeln!(o, "|---|---|---|---|---|---|---|---|---|---|");
    for leg in &r.legs {
        let p = &leg.perf;
        let c = |s| p.counts.get(&s).copied().unwrap_or(0);
        use crate::model::TxStatus::*;
        let _ = writeln!(
            o,
            "| {} | {:.4} | {:.2} | {:.1} | {} | {} | {} | {} | {} | {} |",
            leg.label,
            p.success_rate,
            p.throughput,
            p.avg_latency_ms,
            c(MvccReadConflict),
            c(PhantomReadConflict),
            c(EndorsementPolicyFailure),
            p.early_aborted,
            rel(p.success_rate, base.success_rate),
            rel(p.throughput, base.throughput),
        );
    }
    o
}
