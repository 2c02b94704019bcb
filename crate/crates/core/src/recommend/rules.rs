//! One detector per optimization rule. Each returns `None` when its predicate does not hold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::metrics::MetricsReport;
use crate::miner::AnomalyFinding;
use crate::model::*;

const MAX_WITNESSES: usize = 5;
const MAX_ROWS: usize = 20;

/// `a >= b`, tolerating floating-point noise at the boundary.
pub(crate) fn at_least(a: f64, b: f64) -> bool {
    a >= b - 1e-9 * b.abs().max(1.0)
}

/// `a > b`, tolerating floating-point noise at the boundary.
pub(crate) fn above(a: f64, b: f64) -> bool {
    a > b + 1e-9 * b.abs().max(1.0)
}

fn fmt_list(items: &[String]) -> String {
    items.join(", ")
}

/// For one MVCC or phantom failure: the transaction blamed for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribution {
    pub victim: usize,
    pub culprit: usize,
    /// Write-key sets are disjoint, so swapping the two removes the dependency.
    pub reorderable: bool,
}

/// Blames each read-conflict failure on the latest earlier successful
/// transaction that wrote one of the keys it read (point reads or range
/// observations). Arguments and results are ledger indices.
pub fn attribute_read_conflicts(log: &BlockchainLog) -> (usize, Vec<Attribution>) {
    let mut last_writer: HashMap<&str, usize> = HashMap::new();
    let mut total = 0;
    let mut out = Vec::new();
    for (y, tx) in log.transactions.iter().enumerate() {
        if tx.status.is_mvcc() {
            total += 1;
            let culprit = tx
                .all_read_keys()
                .into_iter()
                .filter_map(|k| last_writer.get(k).copied())
                .max();
            if let Some(x) = culprit {
                let wx = log.transactions[x].write_key_set();
                let reorderable = tx.write_keys().all(|k| !wx.contains(k));
                out.push(Attribution {
                    victim: y,
                    culprit: x,
                    reorderable,
                });
            }
        }
        if tx.status == TxStatus::Success {
            for k in tx.write_keys() {
                last_writer.insert(k, y);
            }
        }
    }
    (total, out)
}

pub fn detect_activity_reordering(log: &BlockchainLog, t: &Thresholds) -> Option<Recommendation> {
    let (total, attributions) = attribute_read_conflicts(log);
    let reorderable: Vec<&Attribution> = attributions.iter().filter(|a| a.reorderable).collect();
    if total == 0 || !at_least(reorderable.len() as f64, t.reorder_fraction * total as f64) {
        return None;
    }
    let txs = &log.transactions;
    // (victim activity, culprit activity) -> (count, witnesses)
    let mut groups: BTreeMap<(&str, &str), (u64, Vec<(u64, u64)>)> = BTreeMap::new();
    for a in &reorderable {
        let (v, c) = (&txs[a.victim], &txs[a.culprit]);
        let g = groups.entry((&v.activity_name, &c.activity_name)).or_default();
        g.0 += 1;
        if g.1.len() < MAX_WITNESSES {
            g.1.push((c.commit_order, v.commit_order));
        }
    }
    let evidence = groups
        .iter()
        .map(|(&(victim, culprit), (failures, witnesses))| Evidence::ReorderablePair {
            victim: victim.to_string(),
            culprit: culprit.to_string(),
            failures: *failures,
            witnesses: witnesses.clone(),
        })
        .collect();
    let defer: Vec<String> = groups
        .keys()
        .map(|(v, _)| v.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pairs: Vec<(String, String)> = groups.keys().map(|(v, c)| (c.to_string(), v.to_string())).collect();
    let explanation = format!(
        "{} of {} read conflicts ({:.1}%) come from a transaction whose writes do not overlap the \
         failed transaction's writes, so the dependency disappears if the reader runs after the \
         conflicting writer has committed. Reschedule {} after the activities that invalidate them.",
        reorderable.len(),
        total,
        100.0 * reorderable.len() as f64 / total as f64,
        fmt_list(&defer)
    );
    Some(Recommendation::new(
        RecommendationKind::ActivityReordering,
        evidence,
        SuggestedAction::ReorderActivities { defer, pairs },
        explanation,
    ))
}

pub fn detect_pruning(anomalies: &[AnomalyFinding]) -> Option<Recommendation> {
    if anomalies.is_empty() {
        return None;
    }
    let guards = anomalies
        .iter()
        .map(|a| PruneGuard {
            activity: a.activity.clone(),
            expected: a.expected,
            anomalous: a.anomalous,
            preceded_by: a.preceded_by.keys().cloned().collect(),
        })
        .collect();
    let names: BTreeSet<&str> = anomalies.iter().map(|a| a.activity.as_str()).collect();
    let explanation = format!(
        "{} execute with more than one transaction type. The uncommon paths (for example a \
         read-only run where an update is expected) do no useful work; abort them early in the \
         client or contract instead of sending them for ordering.",
        names.into_iter().collect::<Vec<_>>().join(", ")
    );
    Some(Recommendation::new(
        RecommendationKind::ProcessModelPruning,
        anomalies.iter().cloned().map(Evidence::Anomaly).collect(),
        SuggestedAction::EarlyAbort { guards },
        explanation,
    ))
}

/// Interval indices where the send rate and the failure share both reach their thresholds.
pub fn flagged_intervals(m: &MetricsReport, t: &Thresholds) -> Vec<usize> {
    (0..m.interval_counts.len())
        .filter(|&i| {
            let (c, f) = (m.interval_counts[i] as f64, m.interval_failures[i] as f64);
            at_least(c, t.rate * m.ins) && at_least(f, c * t.failure_fraction)
        })
        .collect()
}

pub fn detect_rate_control(m: &MetricsReport, t: &Thresholds) -> Option<Recommendation> {
    let flagged = flagged_intervals(m, t);
    if flagged.is_empty() {
        return None;
    }
    let calm = (0..m.trd.len())
        .filter(|i| !flagged.contains(i))
        .map(|i| m.trd[i])
        .filter(|&r| r > 0.0 && r < t.rate)
        .fold(f64::NAN, f64::max);
    let floor = t.rate / 3.0;
    let tps = if calm.is_nan() { floor } else { calm.max(floor) };
    let evidence = flagged
        .iter()
        .map(|&i| Evidence::Interval {
            index: i as u64,
            start_s: i as f64 * m.ins,
            trd: m.trd[i],
            frd: m.frd[i],
        })
        .collect();
    let explanation = format!(
        "{} interval(s) of {} s send at least {} TPS while at least {:.0}% of their transactions \
         fail. Cap the send rate around {:.0} TPS during those periods.",
        flagged.len(),
        m.ins,
        t.rate,
        100.0 * t.failure_fraction,
        tps
    );
    Some(Recommendation::new(
        RecommendationKind::TransactionRateControl,
        evidence,
        SuggestedAction::CapSendRate { tps },
        explanation,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCandidate {
    pub activity: String,
    pub key: String,
    pub failed_tx: u64,
    pub next_tx: u64,
    pub failed_value: f64,
    pub next_value: f64,
    pub failed_raw: String,
    pub next_raw: String,
}

impl DeltaCandidate {
    pub fn is_unit_step(&self) -> bool {
        (self.next_value - self.failed_value).abs() == 1.0
    }
}

/// Adjacent same-activity correlated pairs where the first failed with an MVCC
/// conflict and both wrote a single numeric value to the same key.
pub fn delta_candidates(log: &BlockchainLog, m: &MetricsReport) -> Vec<DeltaCandidate> {
    let by_order: HashMap<u64, &TransactionRecord> = log.transactions.iter().map(|t| (t.commit_order, t)).collect();
    let mut out = Vec::new();
    for p in &m.cor_pa_adjacent {
        let (Some(x), Some(y)) = (by_order.get(&p.x), by_order.get(&p.y)) else {
            continue;
        };
        if x.status != TxStatus::MvccReadConflict || x.write_set.len() != 1 || y.write_set.len() != 1 {
            continue;
        }
        let (wx, wy) = (&x.write_set[0], &y.write_set[0]);
        if wx.key != wy.key {
            continue;
        }
        if let (Ok(vx), Ok(vy)) = (wx.value.trim().parse::<f64>(), wy.value.trim().parse::<f64>()) {
            if vx.is_finite() && vy.is_finite() {
                out.push(DeltaCandidate {
                    activity: x.activity_name.clone(),
                    key: wx.key.clone(),
                    failed_tx: x.commit_order,
                    next_tx: y.commit_order,
                    failed_value: vx,
                    next_value: vy,
                    failed_raw: wx.value.clone(),
                    next_raw: wy.value.clone(),
                });
            }
        }
    }
    out
}

pub fn detect_delta_writes(log: &BlockchainLog, m: &MetricsReport) -> Option<Recommendation> {
    let hits: Vec<DeltaCandidate> = delta_candidates(log, m)
        .into_iter()
        .filter(DeltaCandidate::is_unit_step)
        .collect();
    if hits.is_empty() {
        return None;
    }
    let targets: BTreeSet<(String, String)> = hits.iter().map(|h| (h.activity.clone(), h.key.clone())).collect();
    let evidence = hits
        .iter()
        .take(MAX_ROWS)
        .map(|h| Evidence::DeltaWrite {
            activity: h.activity.clone(),
            key: h.key.clone(),
            failed_tx: h.failed_tx,
            next_tx: h.next_tx,
            failed_value: h.failed_raw.clone(),
            next_value: h.next_raw.clone(),
        })
        .collect();
    let activities: BTreeSet<&str> = targets.iter().map(|(a, _)| a.as_str()).collect();
    let explanation = format!(
        "{} consecutive executions of {} step a single numeric value by exactly one after an MVCC \
         failure. Write each increment to its own delta key and aggregate on read so concurrent \
         increments stop conflicting.",
        hits.len(),
        activities.into_iter().collect::<Vec<_>>().join(", ")
    );
    Some(Recommendation::new(
        RecommendationKind::DeltaWrites,
        evidence,
        SuggestedAction::ConvertToDeltaWrites {
            targets: targets.into_iter().collect(),
        },
        explanation,
    ))
}

fn hotkey_evidence(m: &MetricsReport, key: &str) -> Evidence {
    Evidence::Hotkey {
        key: key.to_string(),
        failed_accesses: m.kfreq.get(key).copied().unwrap_or(0),
        activities: m
            .hotkey_activities
            .get(key)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default(),
    }
}

fn ksig(m: &MetricsReport, key: &str) -> u64 {
    m.ksig.get(key).copied().unwrap_or(0)
}

pub fn detect_partitioning(m: &MetricsReport) -> Option<Recommendation> {
    let keys: Vec<&String> = m.hk.iter().filter(|k| ksig(m, k) > 1).collect();
    if keys.is_empty() {
        return None;
    }
    let activities: BTreeSet<String> = keys
        .iter()
        .flat_map(|k| m.hotkey_activities.get(*k).into_iter().flatten().cloned())
        .collect();
    let hotkeys: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let explanation = format!(
        "Hotkey(s) {} are accessed by several activities ({}). Split those activities across \
         separate contracts with their own copy of the data so they stop invalidating each other.",
        fmt_list(&hotkeys),
        activities.iter().cloned().collect::<Vec<_>>().join(", ")
    );
    Some(Recommendation::new(
        RecommendationKind::SmartContractPartitioning,
        keys.iter().map(|k| hotkey_evidence(m, k)).collect(),
        SuggestedAction::SplitContract {
            hotkeys,
            activities: activities.into_iter().collect(),
        },
        explanation,
    ))
}

pub fn detect_data_model_alteration(m: &MetricsReport) -> Option<Recommendation> {
    let keys: Vec<&String> = m
        .hk
        .iter()
        .filter(|k| ksig(m, k) == 1 || m.hk.len() == 1)
        .collect();
    if keys.is_empty() {
        return None;
    }
    let activities: BTreeSet<String> = keys
        .iter()
        .flat_map(|k| m.hotkey_activities.get(*k).into_iter().flatten().cloned())
        .collect();
    let hotkeys: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let explanation = format!(
        "Hotkey(s) {} concentrate failures{}. Change the data model so concurrent executions of \
         {} write to different keys (for example key by the individual caller instead of a shared \
         aggregate).",
        fmt_list(&hotkeys),
        if m.hk.len() == 1 { " as the only hotkey" } else { " within a single activity" },
        activities.iter().cloned().collect::<Vec<_>>().join(", ")
    );
    Some(Recommendation::new(
        RecommendationKind::DataModelAlteration,
        keys.iter().map(|k| hotkey_evidence(m, k)).collect(),
        SuggestedAction::AlterDataModel {
            hotkeys,
            activities: activities.into_iter().collect(),
        },
        explanation,
    ))
}

/// Block-size deviation: average size at least `Bt` above or below the send rate.
pub fn block_size_deviates(m: &MetricsReport, t: &Thresholds) -> bool {
    if m.tx_count < 2 || m.tr <= 0.0 || m.block_total == 0 {
        return false;
    }
    at_least(m.b_sizeavg, m.tr * (1.0 + t.block_deviation)) || at_least(m.tr * (1.0 - t.block_deviation), m.b_sizeavg)
}

pub fn detect_block_size(m: &MetricsReport, t: &Thresholds) -> Option<Recommendation> {
    if !block_size_deviates(m, t) {
        return None;
    }
    let block_count = (m.tr.round() as u64).max(1);
    let explanation = format!(
        "Blocks average {:.1} transactions while clients send {:.1} TPS, a deviation of at least \
         {:.0}%. Set the block count to {} with a 1 s timeout so one block carries about one second \
         of traffic.",
        m.b_sizeavg,
        m.tr,
        100.0 * t.block_deviation,
        block_count
    );
    Some(Recommendation::new(
        RecommendationKind::BlockSizeAdaptation,
        vec![Evidence::BlockSize {
            tr: m.tr,
            b_sizeavg: m.b_sizeavg,
            block_count: m.b_count_cfg,
            block_timeout_s: m.b_timeout_cfg_s,
        }],
        SuggestedAction::SetBlockSize {
            block_count,
            block_timeout_s: 1.0,
        },
        explanation,
    ))
}

fn heavy<'a>(counts: &'a BTreeMap<String, u64>, bar: f64) -> impl Iterator<Item = (&'a String, u64)> + 'a {
    counts.iter().filter(move |(_, &c)| above(c as f64, bar)).map(|(k, &c)| (k, c))
}

pub fn detect_endorser_restructuring(m: &MetricsReport, t: &Thresholds) -> Option<Recommendation> {
    let bar = m.tx_count as f64 * t.endorser_fraction;
    let share = |c: u64| c as f64 / m.tx_count.max(1) as f64;
    let mut evidence: Vec<Evidence> = heavy(&m.edsig_org, bar)
        .map(|(id, c)| Evidence::Endorser {
            id: id.clone(),
            granularity: Granularity::Org,
            count: c,
            share: share(c),
        })
        .collect();
    evidence.extend(heavy(&m.edsig, bar).map(|(id, c)| Evidence::Endorser {
        id: id.clone(),
        granularity: Granularity::Peer,
        count: c,
        share: share(c),
    }));
    if evidence.is_empty() {
        return None;
    }
    let orgs: BTreeSet<&str> = m.edsig_org.keys().chain(m.ivsig_org.keys()).map(String::as_str).collect();
    let orgs: Vec<&str> = orgs.into_iter().collect();
    let policy = if orgs.len() >= 2 {
        format!("OutOf(2,{})", orgs.join(","))
    } else {
        format!("OutOf(1,{})", orgs.join(","))
    };
    let explanation = format!(
        "Some endorsers take part in more than {:.0}% of all transactions, which makes them a \
         bottleneck. Use a policy such as {} and spread client requests evenly over the endorsers.",
        100.0 * t.endorser_fraction,
        policy
    );
    Some(Recommendation::new(
        RecommendationKind::EndorserRestructuring,
        evidence,
        SuggestedAction::RestructureEndorsement {
            policy,
            even_distribution: true,
        },
        explanation,
    ))
}

pub fn detect_client_boost(m: &MetricsReport, t: &Thresholds) -> Option<Recommendation> {
    let bar = m.tx_count as f64 * t.invoker_fraction;
    let share = |c: u64| c as f64 / m.tx_count.max(1) as f64;
    let orgs: Vec<(&String, u64)> = heavy(&m.ivsig_org, bar).collect();
    let clients: Vec<(&String, u64)> = heavy(&m.ivsig_client, bar).collect();
    if orgs.is_empty() && clients.is_empty() {
        return None;
    }
    let mut evidence: Vec<Evidence> = orgs
        .iter()
        .map(|(id, c)| Evidence::Invoker {
            id: id.to_string(),
            granularity: Granularity::Org,
            count: *c,
            share: share(*c),
        })
        .collect();
    evidence.extend(clients.iter().map(|(id, c)| Evidence::Invoker {
        id: id.to_string(),
        granularity: Granularity::Client,
        count: *c,
        share: share(*c),
    }));
    let org_names: Vec<String> = orgs.iter().map(|(o, _)| o.to_string()).collect();
    let client_names: Vec<String> = clients.iter().map(|(c, _)| c.to_string()).collect();
    let explanation = format!(
        "More than {:.0}% of transactions are invoked by {}. Add client resources for them \
         (double the clients) so the load does not queue behind a few submitters.",
        100.0 * t.invoker_fraction,
        fmt_list(&[org_names.clone(), client_names.clone()].concat())
    );
    Some(Recommendation::new(
        RecommendationKind::ClientResourceBoost,
        evidence,
        SuggestedAction::BoostClients {
            orgs: org_names,
            clients: client_names,
            factor: 2,
        },
        explanation,
    ))
}
