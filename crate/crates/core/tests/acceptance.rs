//! One pass/fail line per acceptance criterion. Expected values come from
//! brute-force oracles written here, not from the library under test.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write as _;
use std::time::{Duration, Instant};

use ledgerlens::eventlog::{build_event_log, eventlog_csv_string, read_eventlog_csv, CaseSource, Event, EventLog, Trace};
use ledgerlens::ingest::derive_transaction_type;
use ledgerlens::metrics::{compute_metrics_with, CorrelatedPair, MetricsOptions, MetricsReport};
use ledgerlens::miner::{alpha_mine, compute_footprint, detect_anomalous_paths, mine_dfg, Place, Relation};
use ledgerlens::recommend::{analyze_log, render_report};
use ledgerlens::sim::{apply_optimization, initial_state, preset, run, PerfSummary, SimConfig, PRESET_NAMES};
use ledgerlens::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn kinds(log: &BlockchainLog, t: &Thresholds) -> BTreeSet<RecommendationKind> {
    analyze_log(log, t).1.recommendations.iter().map(|r| r.kind).collect()
}

fn deterministic_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

// ---------------------------------------------------------------------------
// hand-built ledgers

struct Builder {
    txs: Vec<TransactionRecord>,
}

impl Builder {
    fn new() -> Self {
        Builder { txs: Vec::new() }
    }

    /// Reads are at version 0; endorser and invoker rotate over four orgs.
    fn tx(&mut self, act: &str, reads: &[&str], writes: &[(&str, &str)], status: TxStatus) -> &mut TransactionRecord {
        let i = self.txs.len();
        let org = format!("Org{}", i % 4 + 1);
        let read_set: Vec<KeyVersion> = reads.iter().map(|k| KeyVersion::new(*k, 0)).collect();
        let write_set: Vec<KeyWrite> = writes.iter().map(|(k, v)| KeyWrite::new(*k, *v)).collect();
        let tx_type = derive_transaction_type(&read_set, &write_set, &[]).unwrap();
        self.txs.push(TransactionRecord {
            client_timestamp: 0,
            activity_name: act.into(),
            function_arguments: vec![format!("a{i}")],
            endorsers: [format!("{org}.peer0")].into(),
            invoker: Invoker {
                client: format!("{org}.client0"),
                org,
            },
            read_set,
            write_set,
            range_reads: vec![],
            status,
            tx_type,
            commit_order: i as u64,
            block_number: 0,
        });
        self.txs.last_mut().unwrap()
    }

    fn filler(&mut self, n: usize) {
        for i in 0..n {
            let k = format!("filler{}_{i}", self.txs.len());
            self.tx("Browse", &[&k], &[], TxStatus::Success);
        }
    }

    /// Spreads timestamps evenly over `span_ms` and cuts blocks of `block` txs.
    fn finish(self, span_ms: u64, block: usize) -> BlockchainLog {
        let n = self.txs.len() as u64;
        self.finish_with(|i| i * span_ms / (n - 1).max(1), block)
    }

    fn finish_with(mut self, ts: impl Fn(u64) -> u64, block: usize) -> BlockchainLog {
        let mut blocks = Vec::new();
        for (i, tx) in self.txs.iter_mut().enumerate() {
            tx.client_timestamp = ts(i as u64);
            tx.block_number = (i / block) as u64 + 1;
            if i % block == 0 {
                blocks.push(Block {
                    block_number: tx.block_number,
                    tx_commit_orders: vec![],
                    cut_reason: CutReason::Count,
                });
            }
            blocks.last_mut().unwrap().tx_commit_orders.push(i as u64);
        }
        BlockchainLog {
            config: Some(NetworkConfig {
                block_count: block as u64,
                block_timeout_ms: 1000,
                endorsement_policy: None,
            }),
            transactions: self.txs,
            blocks,
        }
    }
}

fn reorder_log(reorderable: usize) -> BlockchainLog {
    let mut b = Builder::new();
    for i in 0..100 {
        let (a, other) = (format!("a{i}"), format!("b{i}"));
        b.tx("Register", &[], &[(&a, "x")], TxStatus::Success);
        let target = if i < reorderable { &other } else { &a };
        b.tx("Audit", &[&a], &[(target, "y")], TxStatus::MvccReadConflict);
    }
    b.finish(1000, 200)
}

fn pruning_log(anomalous: bool) -> BlockchainLog {
    let mut b = Builder::new();
    for i in 0..10 {
        let p = format!("p{i}");
        if anomalous && i == 7 {
            b.tx("Ship", &[&p], &[], TxStatus::Success);
        } else {
            b.tx("Ship", &[&p], &[(&p, "shipped")], TxStatus::Success);
        }
    }
    b.finish(1000, 10)
}

fn rate_log(failures: usize) -> BlockchainLog {
    let mut b = Builder::new();
    for i in 0..300 {
        let k = format!("k{i}");
        let status = if i % 3 == 0 && i / 3 < failures {
            TxStatus::EndorsementPolicyFailure
        } else {
            TxStatus::Success
        };
        b.tx("Put", &[], &[(&k, "v")], status);
    }
    b.finish_with(|i| i * 3, 300)
}

fn delta_log(next_value: &str) -> BlockchainLog {
    let mut b = Builder::new();
    b.tx("Play", &["count"], &[("count", "5")], TxStatus::MvccReadConflict);
    b.tx("Play", &["count"], &[("count", next_value)], TxStatus::Success);
    b.filler(8);
    b.finish(1000, 10)
}

fn partition_log(failed: usize) -> BlockchainLog {
    let mut b = Builder::new();
    for i in 0..5 {
        let act = if i < 3 { "Play" } else { "Revenue" };
        let status = if i < failed {
            TxStatus::EndorsementPolicyFailure
        } else {
            TxStatus::Success
        };
        b.tx(act, &["h1", "h2"], &[], status);
    }
    b.filler(5);
    b.finish(1000, 10)
}

fn data_model_log(failed: usize) -> BlockchainLog {
    let mut b = Builder::new();
    b.tx("Vote", &["tally"], &[("tally", "{votes:1}")], TxStatus::Success);
    for i in 0..failed {
        let v = format!("{{votes:{}}}", i + 2);
        b.tx("Vote", &["tally"], &[("tally", &v)], TxStatus::MvccReadConflict);
    }
    b.filler(9 - failed);
    b.finish(1000, 10)
}

fn block_log(block: usize) -> BlockchainLog {
    let mut b = Builder::new();
    b.filler(20);
    // 20 txs over 2 s: Tr = 10, so blocks of 4 sit exactly on Tr * (1 - 0.6)
    b.finish(2000, block)
}

fn endorser_log(org1: usize) -> BlockchainLog {
    let mut b = Builder::new();
    for i in 0..20 {
        let org = if i < org1 { 1 } else { 2 + i % 3 };
        let k = format!("k{i}");
        b.tx("Browse", &[&k], &[], TxStatus::Success).endorsers = [format!("Org{org}.peer0")].into();
    }
    b.finish(1000, 20)
}

fn invoker_log(client1: usize) -> BlockchainLog {
    let mut b = Builder::new();
    for i in 0..20 {
        let org = if i < client1 { 1 } else { 2 + i % 3 };
        let k = format!("k{i}");
        b.tx("Browse", &[&k], &[], TxStatus::Success).invoker = Invoker {
            client: format!("Org{org}.client0"),
            org: format!("Org{org}"),
        };
    }
    b.finish(1000, 20)
}

fn criterion_1() -> Verdict {
    use RecommendationKind as K;
    let defaults = Thresholds::default();
    let per_second = Thresholds {
        ins: 1.0,
        ..defaults
    };
    let cases: Vec<(&str, K, Thresholds, BlockchainLog, BlockchainLog)> = vec![
        ("reorder 40% vs 39%", K::ActivityReordering, defaults, reorder_log(40), reorder_log(39)),
        ("pruning", K::ProcessModelPruning, defaults, pruning_log(true), pruning_log(false)),
        ("rate 90 vs 89 of 300", K::TransactionRateControl, per_second, rate_log(90), rate_log(89)),
        ("delta +1 vs +2", K::DeltaWrites, defaults, delta_log("6"), delta_log("7")),
        ("partitioning 5 vs 4", K::SmartContractPartitioning, defaults, partition_log(5), partition_log(4)),
        ("data model 5 vs 4", K::DataModelAlteration, defaults, data_model_log(5), data_model_log(4)),
        ("block size 4 vs 5", K::BlockSizeAdaptation, defaults, block_log(4), block_log(5)),
        ("endorser 11 vs 10 of 20", K::EndorserRestructuring, defaults, endorser_log(11), endorser_log(10)),
        ("invoker 11 vs 10 of 20", K::ClientResourceBoost, defaults, invoker_log(11), invoker_log(10)),
    ];
    let mut checked = 0;
    for (name, kind, t, fires, quiet) in &cases {
        let got = kinds(fires, t);
        ensure!(got == BTreeSet::from([*kind]), "{name}: expected only {kind}, got {got:?}");
        let got = kinds(quiet, t);
        ensure!(got.is_empty(), "{name}: perturbed log still fires {got:?}");
        checked += 2;
    }
    Ok(format!("{checked} golden cases"))
}

// ---------------------------------------------------------------------------
// metrics oracle

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn close_vec(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y))
}

struct Oracle {
    tx_count: u64,
    failed: u64,
    tr: f64,
    interval_counts: Vec<u64>,
    interval_failures: Vec<u64>,
    trd: Vec<f64>,
    frd: Vec<f64>,
    tfr: f64,
    failure_counts: BTreeMap<TxStatus, u64>,
    b_sizeavg: f64,
    block_total: u64,
    max_block_size: u64,
    edsig: BTreeMap<String, u64>,
    edsig_org: BTreeMap<String, u64>,
    ivsig_client: BTreeMap<String, u64>,
    ivsig_org: BTreeMap<String, u64>,
    kfreq: BTreeMap<String, u64>,
    ksig: BTreeMap<String, u64>,
    hk: BTreeSet<String>,
    cor_dv: Vec<CorrelatedPair>,
    cor_p_histogram: BTreeMap<u64, u64>,
    cor_pa: BTreeMap<String, BTreeMap<u64, u64>>,
    cor_pa_adjacent: Vec<CorrelatedPair>,
    intra: u64,
    inter: u64,
}

fn keys_of(tx: &TransactionRecord) -> Vec<String> {
    let mut keys: Vec<String> = tx.read_set.iter().map(|r| r.key.clone()).collect();
    keys.extend(tx.write_set.iter().map(|w| w.key.clone()));
    for r in &tx.range_reads {
        keys.extend(r.observed.iter().map(|o| o.key.clone()));
    }
    keys.sort();
    keys.dedup();
    keys
}

fn brute_force_metrics(log: &BlockchainLog, t: &Thresholds) -> Oracle {
    let txs = &log.transactions;
    let n = txs.len();
    let failed_flags: Vec<bool> = txs.iter().map(|t| t.status != TxStatus::Success).collect();
    let failed = failed_flags.iter().filter(|f| **f).count() as u64;
    let lo = txs.iter().map(|t| t.client_timestamp).min().unwrap_or(0);
    let hi = txs.iter().map(|t| t.client_timestamp).max().unwrap_or(0);
    let span = (hi - lo) as f64 / 1000.0;
    let tr = if n >= 2 && span > 0.0 { n as f64 / span } else { 0.0 };

    let width_ms = t.ins * 1000.0;
    let mut interval_counts = Vec::new();
    let mut interval_failures = Vec::new();
    let mut i = 0usize;
    while n > 0 && (i as f64) * width_ms <= hi as f64 {
        let (a, b) = (i as f64 * width_ms, (i + 1) as f64 * width_ms);
        let inside = |tx: &TransactionRecord| (tx.client_timestamp as f64) >= a && (tx.client_timestamp as f64) < b;
        interval_counts.push(txs.iter().filter(|tx| inside(tx)).count() as u64);
        interval_failures.push(txs.iter().filter(|tx| inside(tx) && tx.status != TxStatus::Success).count() as u64);
        i += 1;
    }

    let mut failure_counts = BTreeMap::new();
    for tx in txs.iter().filter(|t| t.status != TxStatus::Success) {
        *failure_counts.entry(tx.status).or_insert(0) += 1;
    }

    let mut edsig = BTreeMap::new();
    let mut edsig_org = BTreeMap::new();
    let mut ivsig_client = BTreeMap::new();
    let mut ivsig_org = BTreeMap::new();
    for tx in txs {
        let mut orgs = BTreeSet::new();
        for e in &tx.endorsers {
            *edsig.entry(e.clone()).or_insert(0) += 1;
            orgs.insert(e.split('.').next().unwrap().to_string());
        }
        for o in orgs {
            *edsig_org.entry(o).or_insert(0) += 1;
        }
        *ivsig_client.entry(tx.invoker.client.clone()).or_insert(0) += 1;
        *ivsig_org.entry(tx.invoker.org.clone()).or_insert(0) += 1;
    }

    let keys: Vec<Vec<String>> = txs.iter().map(keys_of).collect();
    let mut kfreq = BTreeMap::new();
    let mut acts: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (tx, ks) in txs.iter().zip(&keys) {
        for k in ks {
            if tx.status != TxStatus::Success {
                *kfreq.entry(k.clone()).or_insert(0) += 1;
            }
            acts.entry(k.clone()).or_default().insert(tx.activity_name.clone());
        }
    }
    let bar = (t.hotkey_min as f64).max(t.hotkey_fraction * failed as f64);
    let hk = kfreq.iter().filter(|(_, c)| **c as f64 >= bar).map(|(k, _)| k.clone()).collect();

    // every pair, quadratic
    let ids: Vec<Vec<u32>> = {
        let mut intern: HashMap<&str, u32> = HashMap::new();
        keys.iter()
            .map(|ks| {
                let mut v: Vec<u32> = ks
                    .iter()
                    .map(|k| {
                        let next = intern.len() as u32;
                        *intern.entry(k.as_str()).or_insert(next)
                    })
                    .collect();
                v.sort_unstable();
                v
            })
            .collect()
    };
    let share = |a: &[u32], b: &[u32]| {
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    };
    // index of each tx within its own activity's subsequence
    let position: Vec<u64> = (0..n)
        .map(|y| (0..y).filter(|&z| txs[z].activity_name == txs[y].activity_name).count() as u64)
        .collect();
    let mut cor_dv = Vec::new();
    let mut cor_p_histogram = BTreeMap::new();
    let mut cor_pa: BTreeMap<String, BTreeMap<u64, u64>> = BTreeMap::new();
    let mut cor_pa_adjacent = Vec::new();
    let (mut intra, mut inter) = (0, 0);
    for y in 0..n {
        for x in 0..y {
            if !(failed_flags[x] || failed_flags[y]) || !share(&ids[x], &ids[y]) {
                continue;
            }
            let (tx, ty) = (&txs[x], &txs[y]);
            let d = ty.commit_order - tx.commit_order;
            let pair = CorrelatedPair {
                x: tx.commit_order,
                y: ty.commit_order,
                distance: d,
            };
            cor_dv.push(pair);
            *cor_p_histogram.entry(d).or_insert(0) += 1;
            if tx.activity_name == ty.activity_name {
                let d = position[y] - position[x];
                *cor_pa.entry(tx.activity_name.clone()).or_default().entry(d).or_insert(0) += 1;
                if d == 1 {
                    cor_pa_adjacent.push(CorrelatedPair { distance: 1, ..pair });
                }
            }
            if failed_flags[y] {
                if tx.block_number == ty.block_number {
                    intra += 1;
                } else {
                    inter += 1;
                }
            }
        }
    }
    cor_dv.sort_unstable();
    cor_pa_adjacent.sort_unstable();

    let sizes: Vec<u64> = log.blocks.iter().map(|b| b.tx_commit_orders.len() as u64).collect();
    Oracle {
        tx_count: n as u64,
        failed,
        tr,
        trd: interval_counts.iter().map(|c| *c as f64 / t.ins).collect(),
        frd: interval_failures.iter().map(|c| *c as f64 / t.ins).collect(),
        interval_counts,
        interval_failures,
        tfr: if span > 0.0 { failed as f64 / span } else { 0.0 },
        failure_counts,
        b_sizeavg: if sizes.is_empty() { 0.0 } else { n as f64 / sizes.len() as f64 },
        block_total: sizes.len() as u64,
        max_block_size: sizes.iter().copied().max().unwrap_or(0),
        edsig,
        edsig_org,
        ivsig_client,
        ivsig_org,
        kfreq,
        ksig: acts.into_iter().map(|(k, a)| (k, a.len() as u64)).collect(),
        hk,
        cor_dv,
        cor_p_histogram,
        cor_pa,
        cor_pa_adjacent,
        intra,
        inter,
    }
}

fn compare_metrics(m: &MetricsReport, o: &Oracle) -> Result<(), String> {
    ensure!(m.tx_count == o.tx_count && m.failed_count == o.failed, "counts");
    ensure!(close(m.tr, o.tr), "Tr {} vs {}", m.tr, o.tr);
    ensure!(m.interval_counts == o.interval_counts, "interval counts");
    ensure!(m.interval_failures == o.interval_failures, "interval failures");
    ensure!(close_vec(&m.trd, &o.trd) && close_vec(&m.frd, &o.frd), "Trd/Frd");
    ensure!(close(m.tfr, o.tfr), "TFr");
    ensure!(m.failure_counts == o.failure_counts, "failure counts");
    ensure!(close(m.b_sizeavg, o.b_sizeavg), "B_sizeavg");
    ensure!(m.block_total == o.block_total && m.max_block_size == o.max_block_size, "blocks");
    ensure!(m.edsig == o.edsig && m.edsig_org == o.edsig_org, "EDsig");
    ensure!(m.ivsig_client == o.ivsig_client && m.ivsig_org == o.ivsig_org, "IVsig");
    ensure!(m.kfreq == o.kfreq, "Kfreq");
    ensure!(m.ksig == o.ksig, "Ksig");
    ensure!(m.hk == o.hk, "HK");
    ensure!(m.cor_dv_total == o.cor_dv.len() as u64 && m.cor_dv == o.cor_dv, "corDV");
    ensure!(m.cor_p_histogram == o.cor_p_histogram, "corP");
    ensure!(m.cor_pa == o.cor_pa, "corPA");
    ensure!(m.cor_pa_adjacent == o.cor_pa_adjacent, "corPA adjacent");
    ensure!(
        m.conflict_locality.intra_block == o.intra && m.conflict_locality.inter_block == o.inter,
        "conflict locality"
    );
    Ok(())
}

fn random_config() -> impl Strategy<Value = SimConfig> {
    let names: Vec<&'static str> = PRESET_NAMES.iter().copied().filter(|n| *n != "lap").collect();
    (
        proptest::sample::select(names),
        any::<u64>(),
        200usize..=2000,
        1usize..=300,
        5u64..=200,
        50.0f64..400.0,
    )
        .prop_map(|(name, seed, n, keys, block, rate)| {
            let mut cfg = preset(name).unwrap();
            cfg.seed = seed;
            cfg.n_transactions = n;
            if cfg.use_case == sim::UseCase::Generic {
                cfg.key_space_size = keys;
                cfg.block_count = block;
                cfg.send_rate = rate;
            }
            cfg
        })
}

fn criterion_2() -> Verdict {
    let t = Thresholds::default();
    let mut runner = deterministic_runner(50);
    let pairs = std::cell::Cell::new(0u64);
    let txs = std::cell::Cell::new(0usize);
    runner
        .run(&random_config(), |cfg| {
            let (log, _) = run(&cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let m = compute_metrics_with(&log, &t, MetricsOptions { pair_limit: usize::MAX });
            let o = brute_force_metrics(&log, &t);
            compare_metrics(&m, &o).map_err(|e| TestCaseError::fail(format!("{e} ({:?} seed {})", cfg.use_case, cfg.seed)))?;
            pairs.set(pairs.get() + o.cor_dv.len() as u64);
            txs.set(txs.get() + log.len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("50 logs, {} txs, {} correlated pairs", txs.get(), pairs.get()))
}

// ---------------------------------------------------------------------------
// serial re-validation oracle

fn serial_statuses(cfg: &SimConfig, log: &BlockchainLog) -> Vec<TxStatus> {
    // key -> (live, version)
    let mut state: BTreeMap<String, (bool, u64)> = initial_state(cfg)
        .scan("", "\u{10ffff}")
        .into_iter()
        .map(|kv| (kv.key, (true, kv.version)))
        .collect();
    let policy: EndorsementPolicy = log
        .config
        .as_ref()
        .and_then(|c| c.endorsement_policy.as_deref())
        .expect("policy recorded")
        .parse()
        .expect("policy parses");
    let by_order: HashMap<u64, &TransactionRecord> = log.transactions.iter().map(|t| (t.commit_order, t)).collect();
    let mut out = vec![TxStatus::Success; log.len()];
    for block in &log.blocks {
        for co in &block.tx_commit_orders {
            let tx = by_order[co];
            let orgs: BTreeSet<&str> = tx.endorsers.iter().map(|e| e.split('.').next().unwrap()).collect();
            let version = |k: &str| state.get(k).map_or(0, |e| e.1);
            let status = if !policy.evaluate(&orgs) {
                TxStatus::EndorsementPolicyFailure
            } else if tx.read_set.iter().any(|r| version(&r.key) != r.version) {
                TxStatus::MvccReadConflict
            } else if tx.range_reads.iter().any(|r| {
                let now: Vec<KeyVersion> = state
                    .iter()
                    .filter(|(k, (live, _))| *live && k.as_str() >= r.start_key.as_str() && k.as_str() < r.end_key.as_str())
                    .map(|(k, (_, v))| KeyVersion::new(k.clone(), *v))
                    .collect();
                now != r.observed
            }) {
                TxStatus::PhantomReadConflict
            } else {
                TxStatus::Success
            };
            if status == TxStatus::Success {
                for w in &tx.write_set {
                    let e = state.entry(w.key.clone()).or_insert((false, 0));
                    e.0 = w.value != TOMBSTONE;
                    e.1 += 1;
                }
            }
            out[*co as usize] = status;
        }
    }
    out
}

fn criterion_3() -> Verdict {
    let mut checked = 0;
    let mut failures = 0;
    for name in ["read_heavy", "insert_heavy", "update_heavy", "rangeread_heavy"] {
        for seed in 1..=20 {
            let mut cfg = preset(name).unwrap();
            cfg.seed = seed;
            cfg.n_transactions = 2000;
            let (log, _) = run(&cfg).map_err(|e| e.to_string())?;
            let expected = serial_statuses(&cfg, &log);
            for (tx, want) in log.transactions.iter().zip(&expected) {
                ensure!(
                    tx.status == *want,
                    "{name} seed {seed}: tx {} recorded {} but serial replay gives {}",
                    tx.commit_order,
                    tx.status,
                    want
                );
            }
            checked += log.len();
            failures += expected.iter().filter(|s| **s != TxStatus::Success).count();
        }
    }
    Ok(format!("80 runs, {checked} statuses ({failures} failures) identical"))
}

// ---------------------------------------------------------------------------

fn criterion_4() -> Verdict {
    use RecommendationKind as K;
    let expected: [(&str, &[K]); 5] = [
        ("scm", &[K::ActivityReordering, K::ProcessModelPruning, K::TransactionRateControl]),
        ("drm", &[K::ActivityReordering, K::DeltaWrites, K::SmartContractPartitioning]),
        ("ehr", &[K::ActivityReordering, K::ProcessModelPruning, K::TransactionRateControl]),
        ("dv", &[K::TransactionRateControl, K::DataModelAlteration]),
        ("lap", &[K::DataModelAlteration]),
    ];
    let t = Thresholds::default();
    for (name, want) in expected {
        let (log, _) = run(&preset(name).unwrap()).map_err(|e| e.to_string())?;
        let got = kinds(&log, &t);
        let want: BTreeSet<K> = want.iter().copied().collect();
        ensure!(got == want, "{name}: expected {want:?}, got {got:?}");
    }
    Ok("scm, drm, ehr, dv, lap sets match".into())
}

// ---------------------------------------------------------------------------
// closed loop

fn after(cfg: &SimConfig, kind: RecommendationKind) -> Result<(BlockchainLog, PerfSummary, PerfSummary), String> {
    let t = Thresholds::default();
    let (log, before) = run(cfg).map_err(|e| e.to_string())?;
    let (_, analysis) = analyze_log(&log, &t);
    let rec = analysis
        .recommendations
        .iter()
        .find(|r| r.kind == kind)
        .ok_or_else(|| format!("{kind} did not fire"))?;
    let tuned = apply_optimization(cfg, rec).map_err(|e| e.to_string())?;
    let (log2, perf) = run(&tuned).map_err(|e| e.to_string())?;
    Ok((log2, before, perf))
}

fn criterion_5() -> Verdict {
    let rel = |a: f64, b: f64| (b - a) / a;

    let (_, before, perf) = after(&preset("blockcount50").unwrap(), RecommendationKind::BlockSizeAdaptation)?;
    let (ds, dt) = (
        rel(before.success_rate, perf.success_rate),
        rel(before.throughput, perf.throughput),
    );
    ensure!(
        ds >= 0.10 && dt >= 0.10,
        "block size: success {:+.1}%, throughput {:+.1}% (need +10% each)",
        100.0 * ds,
        100.0 * dt
    );

    let (_, before, perf) = after(&preset("read_heavy").unwrap(), RecommendationKind::ActivityReordering)?;
    let mvcc = |p: &PerfSummary| p.counts[&TxStatus::MvccReadConflict] as f64;
    let drop = 1.0 - mvcc(&perf) / mvcc(&before);
    ensure!(
        drop >= 0.20,
        "reordering: mvcc {} -> {} ({:.1}% drop, need 20%)",
        mvcc(&before),
        mvcc(&perf),
        100.0 * drop
    );

    let (log, _, _) = after(&preset("dv").unwrap(), RecommendationKind::DataModelAlteration)?;
    let vote = PerfSummary::activity_success_rate(&log, "Vote").unwrap_or(0.0);
    ensure!(vote == 1.0, "altered DV: Vote success {vote}");

    Ok(format!(
        "(a) success {:+.1}% throughput {:+.1}%, (b) mvcc -{:.1}%, (c) Vote success {vote}",
        100.0 * ds,
        100.0 * dt,
        100.0 * drop
    ))
}

// ---------------------------------------------------------------------------
// alpha miner and anomaly injection

fn event_log_of(traces: &[(&str, usize)]) -> EventLog {
    let mut co = 0;
    let mut out = Vec::new();
    for (word, copies) in traces {
        for _ in 0..*copies {
            let events = word
                .chars()
                .map(|c| {
                    co += 1;
                    Event {
                        activity: c.to_string(),
                        commit_order: co,
                        status: TxStatus::Success,
                        tx_type: TxType::Update,
                    }
                })
                .collect();
            out.push(Trace {
                value: format!("case{}", out.len()),
                events,
            });
        }
    }
    EventLog {
        case_field: CaseSource::Argument(0),
        traces: out,
        orphans: vec![],
    }
}

fn brute_force_alpha(traces: &[Vec<String>]) -> (BTreeMap<(String, String), char>, BTreeSet<Place>) {
    let acts: Vec<String> = traces.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let follows: BTreeSet<(String, String)> = traces
        .iter()
        .flat_map(|t| t.windows(2).map(|w| (w[0].clone(), w[1].clone())))
        .collect();
    let f = |a: &String, b: &String| follows.contains(&(a.clone(), b.clone()));
    let mut fp = BTreeMap::new();
    for a in &acts {
        for b in &acts {
            let r = match (f(a, b), f(b, a)) {
                (true, false) => '>',
                (false, true) => '<',
                (true, true) => '|',
                (false, false) => '#',
            };
            fp.insert((a.clone(), b.clone()), r);
        }
    }
    let n = acts.len();
    let subset = |mask: u32| -> Vec<&String> { (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &acts[i]).collect() };
    let mut candidates = Vec::new();
    for am in 1u32..(1 << n) {
        for bm in 1u32..(1 << n) {
            let (a, b) = (subset(am), subset(bm));
            let ok = a.iter().all(|x| b.iter().all(|y| fp[&((*x).clone(), (*y).clone())] == '>'))
                && a.iter().all(|x| a.iter().all(|y| fp[&((*x).clone(), (*y).clone())] == '#'))
                && b.iter().all(|x| b.iter().all(|y| fp[&((*x).clone(), (*y).clone())] == '#'));
            if ok {
                candidates.push((am, bm));
            }
        }
    }
    let places = candidates
        .iter()
        .filter(|(a, b)| {
            !candidates
                .iter()
                .any(|(c, d)| (c, d) != (a, b) && c & a == *a && d & b == *b)
        })
        .map(|(a, b)| Place {
            inputs: subset(*a).into_iter().cloned().collect(),
            outputs: subset(*b).into_iter().cloned().collect(),
        })
        .collect();
    (fp, places)
}

fn inject(log: &mut BlockchainLog, every: usize) -> BTreeSet<u64> {
    let mut injected = BTreeSet::new();
    for (i, tx) in log.transactions.iter_mut().enumerate() {
        if i % every != every / 2 {
            continue;
        }
        match tx.tx_type {
            TxType::Update => tx.write_set.clear(),
            TxType::Read => tx.write_set.push(KeyWrite::new("injected", "x")),
            TxType::Write => tx.read_set.push(KeyVersion::new("injected", 0)),
            TxType::RangeRead => tx.range_reads.clear(),
            TxType::Delete => tx.write_set.retain(|w| !w.is_delete()),
        }
        if tx.read_set.is_empty() && tx.write_set.is_empty() && tx.range_reads.is_empty() {
            tx.read_set.push(KeyVersion::new("injected", 0));
        }
        tx.tx_type = derive_transaction_type(&tx.read_set, &tx.write_set, &tx.range_reads).unwrap();
        injected.insert(tx.commit_order);
    }
    injected
}

fn criterion_6() -> Verdict {
    let l1 = event_log_of(&[("abcd", 3), ("acbd", 2), ("aed", 1)]);
    let net = alpha_mine(&l1).map_err(|e| e.to_string())?;
    let traces: Vec<Vec<String>> = l1.activity_traces().map(|t| t.iter().map(|s| s.to_string()).collect()).collect();
    let (fp, places) = brute_force_alpha(&traces);

    let g = mine_dfg(&l1).map_err(|e| e.to_string())?;
    let mined = compute_footprint(&g);
    for ((a, b), r) in &fp {
        let want = match r {
            '>' => Relation::Causal,
            '<' => Relation::Reverse,
            '|' => Relation::Parallel,
            _ => Relation::Choice,
        };
        ensure!(mined.relation(a, b) == Some(want), "footprint {a},{b}");
    }
    let textbook: BTreeSet<Place> = [("a", "be"), ("a", "ce"), ("be", "d"), ("ce", "d")]
        .iter()
        .map(|(i, o)| Place {
            inputs: i.chars().map(String::from).collect(),
            outputs: o.chars().map(String::from).collect(),
        })
        .collect();
    ensure!(places == textbook, "oracle disagrees with the textbook place set: {places:?}");
    let got: BTreeSet<Place> = net.places.iter().cloned().collect();
    ensure!(got == places, "alpha places {got:?}");
    ensure!(
        net.source_outputs == BTreeSet::from(["a".to_string()]) && net.sink_inputs == BTreeSet::from(["d".to_string()]),
        "source/sink"
    );
    ensure!(net.place_count() == 6, "place count {}", net.place_count());

    let mut injected_total = 0;
    let mut clean_logs = 0;
    for (name, seed) in [("uniform", 1), ("read_heavy", 2), ("update_heavy", 3), ("rangeread_heavy", 4), ("insert_heavy", 5)] {
        let mut cfg = preset(name).unwrap();
        cfg.seed = seed;
        cfg.n_transactions = 4000;
        let (mut log, _) = run(&cfg).map_err(|e| e.to_string())?;
        let el = build_event_log(&log, &CaseSource::Argument(0));
        let clean = detect_anomalous_paths(&log, &el);
        ensure!(clean.is_empty(), "{name}: false positives on clean log {clean:?}");
        clean_logs += 1;

        let injected = inject(&mut log, 20);
        let el = build_event_log(&log, &CaseSource::Argument(0));
        let found: BTreeSet<u64> = detect_anomalous_paths(&log, &el)
            .iter()
            .flat_map(|f| f.witnesses.iter().copied())
            .collect();
        ensure!(
            found == injected,
            "{name}: {} injected, {} flagged, {} missed",
            injected.len(),
            found.len(),
            injected.difference(&found).count()
        );
        injected_total += injected.len();
    }
    Ok(format!(
        "L1 footprint and {} places match; {injected_total} injected anomalies found, 0 false positives on {clean_logs} clean logs",
        net.place_count()
    ))
}

// ---------------------------------------------------------------------------

fn criterion_7() -> Verdict {
    let t = Thresholds::default();
    let mut checked = Vec::new();
    for name in ["uniform", "rangeread_heavy", "scm", "drm", "ehr", "dv", "lap"] {
        let mut cfg = preset(name).unwrap();
        cfg.n_transactions = cfg.n_transactions.min(3000);
        let (a, _) = run(&cfg).map_err(|e| e.to_string())?;
        let (b, _) = run(&cfg).map_err(|e| e.to_string())?;
        let text = to_canonical_string(&a);
        ensure!(text == to_canonical_string(&b), "{name}: two runs differ");

        let back = read_canonical_csv(text.as_bytes()).map_err(|e| format!("{name}: {e}"))?;
        ensure!(back == a, "{name}: canonical CSV round trip is lossy");

        let field = eventlog::derive_case_field(&a).map_err(|e| format!("{name}: {e}"))?;
        let el = build_event_log(&a, &field.source);
        let el_text = eventlog_csv_string(&el);
        let el_back = read_eventlog_csv(el_text.as_bytes()).map_err(|e| format!("{name}: {e}"))?;
        ensure!(el_back == el, "{name}: event-log CSV round trip is lossy");

        let (m, an) = analyze_log(&a, &t);
        let r1 = render_report(&an, &m, &t);
        let (m2, an2) = analyze_log(&back, &t);
        let r2 = render_report(&an2, &m2, &t);
        ensure!(r1 == r2, "{name}: report differs after round trip");
        ensure!(r1 == render_report(&an, &m, &t), "{name}: report rendering not stable");
        checked.push(name);
    }
    Ok(format!("{} presets deterministic and lossless", checked.len()))
}

// ---------------------------------------------------------------------------
// threshold monotonicity

fn random_log() -> impl Strategy<Value = BlockchainLog> {
    let tx = (
        0usize..4,
        proptest::collection::vec(0usize..8, 0..3),
        proptest::collection::vec(0usize..8, 0..3),
        0usize..4,
        proptest::collection::btree_set(1usize..=4, 1..=3),
        1usize..=4,
        0usize..2,
        0u64..400,
    );
    (proptest::collection::vec(tx, 2..60), 1usize..12).prop_map(|(rows, block)| {
        let mut b = Builder::new();
        let mut ts = Vec::new();
        let mut clock = 0;
        for (act, reads, writes, status, endorsers, org, client, gap) in rows {
            let reads: Vec<String> = reads.iter().map(|k| format!("k{k}")).collect();
            let mut writes: Vec<(String, String)> = writes.iter().map(|k| (format!("k{k}"), "v".to_string())).collect();
            if reads.is_empty() && writes.is_empty() {
                writes.push(("k0".into(), "v".into()));
            }
            let reads: Vec<&str> = reads.iter().map(String::as_str).collect();
            let writes: Vec<(&str, &str)> = writes.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            let tx = b.tx(&format!("A{act}"), &reads, &writes, TxStatus::ALL[status]);
            tx.endorsers = endorsers.iter().map(|o| format!("Org{o}.peer0")).collect();
            tx.invoker = Invoker {
                client: format!("Org{org}.client{client}"),
                org: format!("Org{org}"),
            };
            clock += gap;
            ts.push(clock);
        }
        b.finish_with(move |i| ts[i as usize], block)
    })
}

fn criterion_8() -> Verdict {
    use RecommendationKind as K;
    let fraction = || 0.05f64..=1.0;
    let strategy = (
        random_log(),
        (fraction(), fraction()),
        (fraction(), fraction()),
        (0.5f64..40.0, 0.5f64..40.0),
        prop_oneof![Just(0.1), Just(0.5), Just(1.0)],
    );
    let mut runner = deterministic_runner(500);
    runner
        .run(&strategy, |(log, (e1, e2), (i1, i2), (r1, r2), ins)| {
            let base = Thresholds {
                endorser_fraction: e1.min(e2),
                invoker_fraction: i1.min(i2),
                rate: r1.min(r2),
                ins,
                ..Thresholds::default()
            };
            let low = kinds(&log, &base);
            let raised = [
                (K::EndorserRestructuring, Thresholds { endorser_fraction: e1.max(e2), ..base }),
                (K::ClientResourceBoost, Thresholds { invoker_fraction: i1.max(i2), ..base }),
                (K::TransactionRateControl, Thresholds { rate: r1.max(r2), ..base }),
            ];
            for (kind, t) in raised {
                let high = kinds(&log, &t);
                prop_assert!(!high.contains(&kind) || low.contains(&kind), "raising the threshold added {}", kind);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("500 random logs, Et/It/Rt1 monotone".into())
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let criteria: [(&str, Duration, fn() -> Verdict); 8] = [
        ("1 rule-firing matrix", Duration::from_secs(5), criterion_1),
        ("2 metrics oracle", Duration::from_secs(60), criterion_2),
        ("3 serial validation oracle", Duration::from_secs(60), criterion_3),
        ("4 use-case recommendation sets", Duration::MAX, criterion_4),
        ("5 closed-loop improvements", Duration::from_secs(180), criterion_5),
        ("6 alpha miner and anomalies", Duration::MAX, criterion_6),
        ("7 determinism and round trips", Duration::MAX, criterion_7),
        ("8 threshold monotonicity", Duration::MAX, criterion_8),
    ];
    let mut failed = Vec::new();
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let verdict = match verdict {
            Ok(_) if took > budget => Err(format!("took {took:.1?}, budget {budget:.0?}")),
            v => v,
        };
        // written to the raw handle so the lines survive libtest's output capture
        let line = match &verdict {
            Ok(detail) => format!("PASS criterion {name}: {detail} [{took:.1?}]"),
            Err(why) => {
                failed.push(name);
                format!("FAIL criterion {name}: {why} [{took:.1?}]")
            }
        };
        writeln!(std::io::stderr(), "{line}").unwrap();
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
