//! Optimization recommendations: one detector per rule, plus report rendering.

mod report;
pub mod rules;

use serde::{Deserialize, Serialize};

pub use report::{render_report, Report, REPORT_SCHEMA_VERSION};
pub use rules::*;

use crate::metrics::MetricsReport;
use crate::miner::AnomalyFinding;
use crate::model::*;

/// Fired rules together with interpretation notes for the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub recommendations: Vec<Recommendation>,
    pub notes: Vec<String>,
}

/// Evaluates every rule, ordered by (level, kind, first evidence commit order).
pub fn recommend(
    log: &BlockchainLog,
    m: &MetricsReport,
    t: &Thresholds,
    anomalies: &[AnomalyFinding],
) -> Vec<Recommendation> {
    let mut recs: Vec<Recommendation> = [
        detect_activity_reordering(log, t),
        detect_pruning(anomalies),
        detect_rate_control(m, t),
        detect_delta_writes(log, m),
        detect_partitioning(m),
        detect_data_model_alteration(m),
        detect_block_size(m, t),
        detect_endorser_restructuring(m, t),
        detect_client_boost(m, t),
    ]
    .into_iter()
    .flatten()
    .collect();
    recs.sort_by_key(Recommendation::sort_key);
    recs
}

/// Metrics, case derivation, anomaly detection and rule evaluation in one pass.
///
/// When no case field can be derived the anomaly findings simply lack predecessor counts.
pub fn analyze_log(log: &BlockchainLog, t: &Thresholds) -> (MetricsReport, Analysis) {
    let m = crate::metrics::compute_metrics(log, t);
    let el = match crate::eventlog::derive_case_field(log) {
        Ok(f) => crate::eventlog::build_event_log(log, &f.source),
        Err(_) => crate::eventlog::EventLog {
            case_field: crate::eventlog::CaseSource::Argument(0),
            traces: Vec::new(),
            orphans: Vec::new(),
        },
    };
    let anomalies = crate::miner::detect_anomalous_paths(log, &el);
    let analysis = analyze(log, &m, t, &anomalies);
    (m, analysis)
}

pub fn analyze(log: &BlockchainLog, m: &MetricsReport, t: &Thresholds, anomalies: &[AnomalyFinding]) -> Analysis {
    Analysis {
        recommendations: recommend(log, m, t, anomalies),
        notes: notes(log, m, t),
    }
}

fn notes(log: &BlockchainLog, m: &MetricsReport, t: &Thresholds) -> Vec<String> {
    let mut out = vec![format!(
        "Block-size rule reads the deviation as relative to the send rate: it fires when the average \
         block size is at least Tr*(1+Bt) or at most Tr*(1-Bt). Here Tr = {:.3} TPS, so the bounds are \
         {:.3} and {:.3} against an average of {:.3}.",
        m.tr,
        m.tr * (1.0 + t.block_deviation),
        m.tr * (1.0 - t.block_deviation),
        m.b_sizeavg
    )];
    let (total, attributions) = attribute_read_conflicts(log);
    if total > 0 {
        let reorderable = attributions.iter().filter(|a| a.reorderable).count();
        out.push(format!(
            "Read conflicts: {total} in total, {} attributed to an earlier committed writer, {reorderable} \
             of those with disjoint write sets (reordering gate At = {}).",
            attributions.len(),
            t.reorder_fraction
        ));
    }
    let near: Vec<DeltaCandidate> = delta_candidates(log, m)
        .into_iter()
        .filter(|c| !c.is_unit_step())
        .collect();
    if !near.is_empty() {
        let keys: std::collections::BTreeSet<(&str, &str)> =
            near.iter().map(|c| (c.activity.as_str(), c.key.as_str())).collect();
        out.push(format!(
            "Delta-write near misses: {} failed numeric single-key writes are followed by a step other \
             than +/-1 ({}).",
            near.len(),
            keys.iter().map(|(a, k)| format!("{a} on {k}")).collect::<Vec<_>>().join(", ")
        ));
    }
    let mixed = log
        .transactions
        .iter()
        .filter(|tx| tx.tx_type == TxType::Update && tx.read_keys().all(|k| !tx.write_keys().any(|w| w == k)))
        .count();
    if mixed > 0 {
        out.push(format!(
            "{mixed} transaction(s) read and write disjoint keys; they are classified as updates."
        ));
    }
    if m.cor_dv_total > 0 {
        out.push(
            "Proximity correlation is computed for every correlated pair since data-value correlation is binary."
                .to_string(),
        );
    }
    if m.cor_dv_truncated {
        out.push(format!(
            "Only the first {} of {} correlated pairs are listed in the metrics; counts cover all of them.",
            m.cor_dv.len(),
            m.cor_dv_total
        ));
    }
    out
}
