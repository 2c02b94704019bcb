//! Log metrics: send and failure rates, block statistics, endorser and invoker
//! significance, key statistics and transaction correlations.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("the log carries no network configuration record")]
    MissingConfig,
}

/// A correlated pair of transactions, by commit order, `x < y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CorrelatedPair {
    pub x: u64,
    pub y: u64,
    /// `y - x` in the ledger, or in the activity's own subsequence for corPA.
    pub distance: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictLocality {
    pub intra_block: u64,
    pub inter_block: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub b_count_cfg: u64,
    pub b_timeout_cfg_s: f64,
    pub b_sizeavg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsOptions {
    /// Upper bound on stored corDV pairs; counts and histograms stay exact.
    pub pair_limit: usize,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions { pair_limit: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tx_count: u64,
    pub failed_count: u64,
    pub duration_s: f64,
    pub ins: f64,
    pub tr: f64,
    pub trd: Vec<f64>,
    pub frd: Vec<f64>,
    pub interval_counts: Vec<u64>,
    pub interval_failures: Vec<u64>,
    pub tfr: f64,
    pub failure_counts: BTreeMap<TxStatus, u64>,
    pub failure_rates: BTreeMap<TxStatus, f64>,
    pub b_count_cfg: Option<u64>,
    pub b_timeout_cfg_s: Option<f64>,
    pub block_total: u64,
    pub max_block_size: u64,
    pub b_sizeavg: f64,
    pub edsig: BTreeMap<String, u64>,
    pub edsig_org: BTreeMap<String, u64>,
    pub ivsig_client: BTreeMap<String, u64>,
    pub ivsig_org: BTreeMap<String, u64>,
    pub kfreq: BTreeMap<String, u64>,
    pub ksig: BTreeMap<String, u64>,
    pub hk: BTreeSet<String>,
    pub hotkey_activities: BTreeMap<String, BTreeSet<String>>,
    pub cor_dv_total: u64,
    pub cor_dv_truncated: bool,
    pub cor_dv: Vec<CorrelatedPair>,
    /// corP distance -> number of correlated pairs at that distance.
    pub cor_p_histogram: BTreeMap<u64, u64>,
    /// activity -> (same-activity distance -> pair count).
    pub cor_pa: BTreeMap<String, BTreeMap<u64, u64>>,
    /// Correlated same-activity pairs with corPA = 1.
    pub cor_pa_adjacent: Vec<CorrelatedPair>,
    pub conflict_locality: ConflictLocality,
}

fn span_s(log: &BlockchainLog) -> f64 {
    let ts = log.transactions.iter().map(|t| t.client_timestamp);
    match (ts.clone().min(), ts.max()) {
        (Some(lo), Some(hi)) => (hi - lo) as f64 / 1000.0,
        _ => 0.0,
    }
}

pub fn transaction_rate(log: &BlockchainLog) -> f64 {
    let span = span_s(log);
    if log.len() < 2 || span <= 0.0 {
        return 0.0;
    }
    log.len() as f64 / span
}

fn bucket(ts_ms: u64, ins: f64) -> usize {
    (ts_ms as f64 / (ins * 1000.0)).floor() as usize
}

fn bucket_counts(log: &BlockchainLog, ins: f64, keep: impl Fn(&TransactionRecord) -> bool) -> Vec<u64> {
    let Some(max_ts) = log.transactions.iter().map(|t| t.client_timestamp).max() else {
        return Vec::new();
    };
    let mut counts = vec![0u64; bucket(max_ts, ins) + 1];
    for tx in log.transactions.iter().filter(|t| keep(t)) {
        counts[bucket(tx.client_timestamp, ins)] += 1;
    }
    counts
}

/// Per-interval send rate; interval `i` covers `[i*ins, (i+1)*ins)` seconds.
pub fn rate_distribution(log: &BlockchainLog, ins: f64) -> Vec<f64> {
    bucket_counts(log, ins, |_| true).into_iter().map(|c| c as f64 / ins).collect()
}

/// Per-interval failure rate over the same intervals as [`rate_distribution`].
pub fn failure_distribution(log: &BlockchainLog, ins: f64) -> Vec<f64> {
    bucket_counts(log, ins, |t| t.status.is_failure())
        .into_iter()
        .map(|c| c as f64 / ins)
        .collect()
}

pub fn block_stats(log: &BlockchainLog) -> Result<BlockStats, MetricsError> {
    let cfg = log.config.as_ref().ok_or(MetricsError::MissingConfig)?;
    Ok(BlockStats {
        b_count_cfg: cfg.block_count,
        b_timeout_cfg_s: cfg.block_timeout_s(),
        b_sizeavg: average_block_size(log),
    })
}

fn average_block_size(log: &BlockchainLog) -> f64 {
    if log.blocks.is_empty() {
        0.0
    } else {
        log.len() as f64 / log.blocks.len() as f64
    }
}

/// Endorsement counts per peer and per organization (an org counts once per tx).
pub fn endorser_significance(log: &BlockchainLog) -> (BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let mut peers = BTreeMap::new();
    let mut orgs = BTreeMap::new();
    for tx in &log.transactions {
        for e in &tx.endorsers {
            *peers.entry(e.clone()).or_insert(0) += 1;
        }
        for o in tx.endorsing_orgs() {
            *orgs.entry(o.to_string()).or_insert(0) += 1;
        }
    }
    (peers, orgs)
}

/// Invocation counts per client and per organization.
pub fn invoker_significance(log: &BlockchainLog) -> (BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let mut clients = BTreeMap::new();
    let mut orgs = BTreeMap::new();
    for tx in &log.transactions {
        *clients.entry(tx.invoker.client.clone()).or_insert(0) += 1;
        *orgs.entry(tx.invoker.org.clone()).or_insert(0) += 1;
    }
    (clients, orgs)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyStats {
    pub kfreq: BTreeMap<String, u64>,
    pub ksig: BTreeMap<String, u64>,
    pub hk: BTreeSet<String>,
    pub hotkey_activities: BTreeMap<String, BTreeSet<String>>,
}

pub fn key_stats(log: &BlockchainLog, t: &Thresholds) -> KeyStats {
    let mut kfreq: BTreeMap<String, u64> = BTreeMap::new();
    let mut activities: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut failed = 0u64;
    for tx in &log.transactions {
        let keys = tx.accessed_keys();
        if tx.status.is_failure() {
            failed += 1;
            for k in &keys {
                *kfreq.entry(k.to_string()).or_insert(0) += 1;
            }
        }
        for k in keys {
            activities.entry(k).or_default().insert(&tx.activity_name);
        }
    }
    let bar = (t.hotkey_min as f64).max(t.hotkey_fraction * failed as f64);
    let hk: BTreeSet<String> = kfreq
        .iter()
        .filter(|(_, &c)| c as f64 >= bar)
        .map(|(k, _)| k.clone())
        .collect();
    let hotkey_activities = hk
        .iter()
        .map(|k| {
            let acts = activities[k.as_str()].iter().map(|a| a.to_string()).collect();
            (k.clone(), acts)
        })
        .collect();
    KeyStats {
        kfreq,
        ksig: activities
            .into_iter()
            .map(|(k, a)| (k.to_string(), a.len() as u64))
            .collect(),
        hk,
        hotkey_activities,
    }
}

/// Visits every correlated pair `(x, y)`, grouped by `y` and sorted by `x` within a group.
///
/// A pair is correlated when the two transactions share an accessed key and at
/// least one of them failed. Arguments are ledger indices.
pub fn for_each_correlated_pair(log: &BlockchainLog, mut visit: impl FnMut(usize, usize)) {
    let txs = &log.transactions;
    let mut key_ids: HashMap<&str, usize> = HashMap::new();
    // per key: ledger indices of all prior accessors, and of prior failed accessors
    let mut all: Vec<Vec<usize>> = Vec::new();
    let mut failed: Vec<Vec<usize>> = Vec::new();
    let mut stamp = vec![usize::MAX; txs.len()];
    let mut found = Vec::new();
    for (y, tx) in txs.iter().enumerate() {
        let ids: Vec<usize> = tx
            .accessed_keys()
            .into_iter()
            .map(|k| {
                let next = key_ids.len();
                let id = *key_ids.entry(k).or_insert(next);
                if id == all.len() {
                    all.push(Vec::new());
                    failed.push(Vec::new());
                }
                id
            })
            .collect();
        let y_failed = tx.status.is_failure();
        found.clear();
        for &id in &ids {
            let prior = if y_failed { &all[id] } else { &failed[id] };
            for &x in prior {
                if stamp[x] != y {
                    stamp[x] = y;
                    found.push(x);
                }
            }
        }
        found.sort_unstable();
        for &x in &found {
            visit(x, y);
        }
        for &id in &ids {
            all[id].push(y);
            if y_failed {
                failed[id].push(y);
            }
        }
    }
}

pub fn data_value_correlation(log: &BlockchainLog) -> Vec<CorrelatedPair> {
    let txs = &log.transactions;
    let mut pairs = Vec::new();
    for_each_correlated_pair(log, |x, y| {
        let (cx, cy) = (txs[x].commit_order, txs[y].commit_order);
        pairs.push(CorrelatedPair {
            x: cx,
            y: cy,
            distance: cy - cx,
        });
    });
    pairs.sort_unstable();
    pairs
}

/// Position of every transaction within its activity's own subsequence.
fn activity_positions(log: &BlockchainLog) -> Vec<u64> {
    let mut next: HashMap<&str, u64> = HashMap::new();
    log.transactions
        .iter()
        .map(|t| {
            let n = next.entry(&t.activity_name).or_insert(0);
            *n += 1;
            *n - 1
        })
        .collect()
}

/// corP of every correlated pair, plus the same-activity pairs with their corPA distance.
pub fn proximity_correlation(log: &BlockchainLog) -> (Vec<CorrelatedPair>, BTreeMap<String, Vec<CorrelatedPair>>) {
    let txs = &log.transactions;
    let pos = activity_positions(log);
    let mut cor_p = Vec::new();
    let mut cor_pa: BTreeMap<String, Vec<CorrelatedPair>> = BTreeMap::new();
    for_each_correlated_pair(log, |x, y| {
        let (cx, cy) = (txs[x].commit_order, txs[y].commit_order);
        cor_p.push(CorrelatedPair {
            x: cx,
            y: cy,
            distance: cy - cx,
        });
        if txs[x].activity_name == txs[y].activity_name {
            cor_pa
                .entry(txs[x].activity_name.clone())
                .or_default()
                .push(CorrelatedPair {
                    x: cx,
                    y: cy,
                    distance: pos[y] - pos[x],
                });
        }
    });
    cor_p.sort_unstable();
    for v in cor_pa.values_mut() {
        v.sort_unstable();
    }
    (cor_p, cor_pa)
}

pub fn classify_conflict_locality(log: &BlockchainLog) -> ConflictLocality {
    let txs = &log.transactions;
    let mut out = ConflictLocality::default();
    for_each_correlated_pair(log, |x, y| {
        if txs[y].status.is_failure() {
            if txs[x].block_number == txs[y].block_number {
                out.intra_block += 1;
            } else {
                out.inter_block += 1;
            }
        }
    });
    out
}

pub fn compute_metrics(log: &BlockchainLog, t: &Thresholds) -> MetricsReport {
    compute_metrics_with(log, t, MetricsOptions::default())
}

pub fn compute_metrics_with(log: &BlockchainLog, t: &Thresholds, opts: MetricsOptions) -> MetricsReport {
    let ins = t.ins;
    let duration_s = span_s(log);
    let interval_counts = bucket_counts(log, ins, |_| true);
    let interval_failures = bucket_counts(log, ins, |t| t.status.is_failure());

    let mut failure_counts: BTreeMap<TxStatus, u64> = BTreeMap::new();
    for tx in log.transactions.iter().filter(|t| t.status.is_failure()) {
        *failure_counts.entry(tx.status).or_insert(0) += 1;
    }
    let failed_count: u64 = failure_counts.values().sum();
    let per_s = |c: u64| if duration_s > 0.0 { c as f64 / duration_s } else { 0.0 };
    let failure_rates = failure_counts.iter().map(|(&s, &c)| (s, per_s(c))).collect();

    let (edsig, edsig_org) = endorser_significance(log);
    let (ivsig_client, ivsig_org) = invoker_significance(log);
    let keys = key_stats(log, t);

    let txs = &log.transactions;
    let pos = activity_positions(log);
    let mut cor_dv = Vec::new();
    let mut cor_dv_total = 0u64;
    let mut cor_p_histogram: BTreeMap<u64, u64> = BTreeMap::new();
    let mut cor_pa: BTreeMap<String, BTreeMap<u64, u64>> = BTreeMap::new();
    let mut cor_pa_adjacent = Vec::new();
    let mut locality = ConflictLocality::default();
    for_each_correlated_pair(log, |x, y| {
        let (tx, ty) = (&txs[x], &txs[y]);
        let pair = CorrelatedPair {
            x: tx.commit_order,
            y: ty.commit_order,
            distance: ty.commit_order - tx.commit_order,
        };
        cor_dv_total += 1;
        if cor_dv.len() < opts.pair_limit {
            cor_dv.push(pair);
        }
        *cor_p_histogram.entry(pair.distance).or_insert(0) += 1;
        if tx.activity_name == ty.activity_name {
            let d = pos[y] - pos[x];
            *cor_pa
                .entry(tx.activity_name.clone())
                .or_default()
                .entry(d)
                .or_insert(0) += 1;
            if d == 1 {
                cor_pa_adjacent.push(CorrelatedPair { distance: 1, ..pair });
            }
        }
        if ty.status.is_failure() {
            if tx.block_number == ty.block_number {
                locality.intra_block += 1;
            } else {
                locality.inter_block += 1;
            }
        }
    });
    cor_dv.sort_unstable();
    cor_pa_adjacent.sort_unstable();

    MetricsReport {
        tx_count: log.len() as u64,
        failed_count,
        duration_s,
        ins,
        tr: transaction_rate(log),
        trd: interval_counts.iter().map(|&c| c as f64 / ins).collect(),
        frd: interval_failures.iter().map(|&c| c as f64 / ins).collect(),
        interval_counts,
        interval_failures,
        tfr: per_s(failed_count),
        failure_counts,
        failure_rates,
        b_count_cfg: log.config.as_ref().map(|c| c.block_count),
        b_timeout_cfg_s: log.config.as_ref().map(|c| c.block_timeout_s()),
        block_total: log.blocks.len() as u64,
        max_block_size: log.blocks.iter().map(|b| b.tx_commit_orders.len() as u64).max().unwrap_or(0),
        b_sizeavg: average_block_size(log),
        edsig,
        edsig_org,
        ivsig_client,
        ivsig_org,
        kfreq: keys.kfreq,
        ksig: keys.ksig,
        hk: keys.hk,
        hotkey_activities: keys.hotkey_activities,
        cor_dv_truncated: cor_dv_total > cor_dv.len() as u64,
        cor_dv_total,
        cor_dv,
        cor_p_histogram,
        cor_pa,
        cor_pa_adjacent,
        conflict_locality: locality,
    }
}
