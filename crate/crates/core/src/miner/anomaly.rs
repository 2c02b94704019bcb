use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::eventlog::EventLog;
use crate::model::{BlockchainLog, TxType};

/// Context label for a witness that opens its trace.
pub const TRACE_START: &str = "(trace start)";

/// An activity executing with a transaction type other than its usual one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyFinding {
    pub activity: String,
    pub expected: TxType,
    pub anomalous: TxType,
    /// Commit orders of the anomalous executions.
    pub witnesses: Vec<u64>,
    /// Activity directly before each witness in its trace, with counts.
    pub preceded_by: BTreeMap<String, u64>,
}

/// Flags every activity seen with two or more transaction types.
///
/// The expected type is the majority type; when several types tie for the
/// majority, each of them is reported against every other type.
pub fn detect_anomalous_paths(log: &BlockchainLog, el: &EventLog) -> Vec<AnomalyFinding> {
    let rows = log.transactions.iter().map(|t| (t.activity_name.as_str(), t.tx_type, t.commit_order));
    find(rows, el)
}

/// Same as [`detect_anomalous_paths`] but driven by the event log alone,
/// counting orphan events too.
pub fn detect_anomalous_paths_in(el: &EventLog) -> Vec<AnomalyFinding> {
    let rows = el
        .traces
        .iter()
        .flat_map(|t| t.events.iter())
        .chain(el.orphans.iter())
        .map(|e| (e.activity.as_str(), e.tx_type, e.commit_order));
    find(rows, el)
}

fn find<'a>(rows: impl Iterator<Item = (&'a str, TxType, u64)>, el: &EventLog) -> Vec<AnomalyFinding> {
    let mut predecessor: HashMap<u64, &str> = HashMap::new();
    for t in &el.traces {
        for (i, e) in t.events.iter().enumerate() {
            let prev = if i == 0 { TRACE_START } else { t.events[i - 1].activity.as_str() };
            predecessor.insert(e.commit_order, prev);
        }
    }
    let mut by_activity: BTreeMap<&str, BTreeMap<TxType, Vec<u64>>> = BTreeMap::new();
    for (activity, tx_type, commit_order) in rows {
        by_activity.entry(activity).or_default().entry(tx_type).or_default().push(commit_order);
    }
    let mut out = Vec::new();
    for (activity, types) in by_activity {
        if types.len() < 2 {
            continue;
        }
        let top = types.values().map(Vec::len).max().unwrap_or(0);
        for (&expected, _) in types.iter().filter(|(_, w)| w.len() == top) {
            for (&anomalous, witnesses) in types.iter().filter(|(t, _)| **t != expected) {
                let mut witnesses = witnesses.clone();
                witnesses.sort_unstable();
                let mut preceded_by = BTreeMap::new();
                for co in &witnesses {
                    if let Some(p) = predecessor.get(co) {
                        *preceded_by.entry(p.to_string()).or_insert(0) += 1;
                    }
                }
                out.push(AnomalyFinding {
                    activity: activity.to_string(),
                    expected,
                    anomalous,
                    witnesses,
                    preceded_by,
                });
            }
        }
    }
    out
}
