//! Discrete-event execution of the execute-order-validate pipeline.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ContractVariant, SimConfig};
use super::contract::{execute, initial_state, Exec};
use super::workload::{generate_workload, Proposal};
use crate::ingest::derive_transaction_type;
use crate::model::{
    endorser_org, Block, BlockchainLog, CutReason, NetworkConfig, TransactionRecord, TxStatus,
};

/// Performance of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfSummary {
    /// Ledger entries.
    pub n: usize,
    pub successes: usize,
    /// Successful transactions per second between the first send and the last commit.
    pub throughput: f64,
    pub success_rate: f64,
    /// Commit time minus client send time, averaged over successful transactions.
    pub avg_latency_ms: f64,
    pub counts: BTreeMap<TxStatus, usize>,
    /// Proposals dropped by the client before ordering, so absent from the ledger.
    pub early_aborted: usize,
    pub blocks: usize,
    pub duration_s: f64,
}

impl PerfSummary {
    /// Success rate of one activity in a log.
    pub fn activity_success_rate(log: &BlockchainLog, activity: &str) -> Option<f64> {
        let txs: Vec<_> = log.transactions.iter().filter(|t| t.activity_name == activity).collect();
        if txs.is_empty() {
            return None;
        }
        let ok = txs.iter().filter(|t| t.status == TxStatus::Success).count();
        Some(ok as f64 / txs.len() as f64)
    }
}

// Event priorities at equal timestamps: commits land before new executions see the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Commit(usize),
    Timeout(u64),
    Arrive(usize),
    Endorse(usize),
}

struct Pending {
    proposal: Proposal,
    exec: Option<Exec>,
}

/// Runs a configuration and returns the ledger and its performance summary.
pub fn run(cfg: &SimConfig) -> Result<(BlockchainLog, PerfSummary), ConfigError> {
    cfg.validate()?;
    let policy = cfg.policy()?;
    let proposals = generate_workload(cfg);
    let mut state = initial_state(cfg);

    let us = |ms: f64| (ms * 1000.0).round() as u64;
    let service = us(cfg.client_service_ms);
    let endorse = us(cfg.endorse_latency_ms);
    let order = us(cfg.order_latency_ms);
    let validate = us(cfg.validate_latency_ms);
    let overhead = us(cfg.block_overhead_ms);
    let timeout = us(cfg.block_timeout_s * 1000.0).max(1);

    let mut heap: BinaryHeap<Reverse<(u64, Event, u64)>> = BinaryHeap::new();
    let mut tie = 0u64;
    let mut push = |heap: &mut BinaryHeap<_>, t: u64, e: Event| {
        tie += 1;
        heap.push(Reverse((t, e, tie)));
    };

    // client queues: one proposal at a time per client
    let mut client_free: BTreeMap<&str, u64> = BTreeMap::new();
    for (i, p) in proposals.iter().enumerate() {
        let free = client_free.entry(p.invoker.client.as_str()).or_insert(0);
        let ready = p.ts_us.max(*free) + service;
        *free = ready;
        push(&mut heap, ready + endorse, Event::Endorse(i));
    }

    let mut pending: Vec<Pending> = proposals
        .iter()
        .map(|p| Pending {
            proposal: p.clone(),
            exec: None,
        })
        .collect();
    let mut buffer: Vec<usize> = Vec::new();
    let mut timer_gen = 0u64;
    let mut cut_blocks: Vec<(Vec<usize>, CutReason)> = Vec::new();
    let mut committer_free = 0u64;
    let mut early_aborted = 0usize;

    let mut log = BlockchainLog {
        config: Some(NetworkConfig {
            block_count: cfg.block_count,
            block_timeout_ms: us(cfg.block_timeout_s * 1000.0) / 1000,
            endorsement_policy: Some(policy.to_string()),
        }),
        ..Default::default()
    };
    let mut commit_time: Vec<u64> = Vec::new();

    while let Some(Reverse((now, event, _))) = heap.pop() {
        match event {
            Event::Endorse(i) => {
                let exec = execute(&pending[i].proposal.op, cfg.contract_variant, &state, i as u64);
                if exec.anomalous && cfg.contract_variant == ContractVariant::Pruned {
                    early_aborted += 1;
                    continue;
                }
                pending[i].exec = Some(exec);
                push(&mut heap, now + order, Event::Arrive(i));
            }
            Event::Arrive(i) => {
                buffer.push(i);
                if buffer.len() as u64 >= cfg.block_count {
                    timer_gen += 1;
                    cut_blocks.push((std::mem::take(&mut buffer), CutReason::Count));
                } else if buffer.len() == 1 {
                    timer_gen += 1;
                    push(&mut heap, now + timeout, Event::Timeout(timer_gen));
                    continue;
                } else {
                    continue;
                }
                let start = now.max(committer_free);
                committer_free = start + overhead + validate * cut_blocks.last().unwrap().0.len() as u64;
                push(&mut heap, committer_free, Event::Commit(cut_blocks.len() - 1));
            }
            Event::Timeout(gen) => {
                if gen != timer_gen || buffer.is_empty() {
                    continue;
                }
                timer_gen += 1;
                cut_blocks.push((std::mem::take(&mut buffer), CutReason::Timeout));
                let start = now.max(committer_free);
                committer_free = start + overhead + validate * cut_blocks.last().unwrap().0.len() as u64;
                push(&mut heap, committer_free, Event::Commit(cut_blocks.len() - 1));
            }
            Event::Commit(b) => {
                let block_number = b as u64 + 1;
                let (members, reason) = &cut_blocks[b];
                let mut orders = Vec::with_capacity(members.len());
                for &i in members {
                    let p = &pending[i];
                    let exec = p.exec.as_ref().expect("ordered proposals were executed");
                    let status = validate_one(&policy, p, exec, &state);
                    if status == TxStatus::Success {
                        exec.writes.iter().for_each(|w| state.apply(w));
                    }
                    let commit_order = log.transactions.len() as u64;
                    orders.push(commit_order);
                    commit_time.push(now);
                    log.transactions.push(TransactionRecord {
                        client_timestamp: p.proposal.ts_us / 1000,
                        activity_name: p.proposal.op.activity().to_string(),
                        function_arguments: p.proposal.op.args(),
                        endorsers: p.proposal.endorsers.clone(),
                        invoker: p.proposal.invoker.clone(),
                        read_set: exec.reads.clone(),
                        write_set: exec.writes.clone(),
                        range_reads: exec.ranges.clone(),
                        status,
                        tx_type: derive_transaction_type(&exec.reads, &exec.writes, &exec.ranges)
                            .expect("contracts always read or write"),
                        commit_order,
                        block_number,
                    });
                }
                log.blocks.push(Block {
                    block_number,
                    tx_commit_orders: orders,
                    cut_reason: *reason,
                });
            }
        }
    }

    let summary = summarize(&log, &commit_time, &proposals, early_aborted);
    Ok((log, summary))
}

fn validate_one(
    policy: &crate::model::EndorsementPolicy,
    p: &Pending,
    exec: &Exec,
    state: &super::state::WorldState,
) -> TxStatus {
    let orgs = p.proposal.endorsers.iter().map(|e| endorser_org(e)).collect();
    if !policy.evaluate(&orgs) {
        return TxStatus::EndorsementPolicyFailure;
    }
    if exec.reads.iter().any(|r| state.version(&r.key) != r.version) {
        return TxStatus::MvccReadConflict;
    }
    if exec.ranges.iter().any(|r| state.scan(&r.start_key, &r.end_key) != r.observed) {
        return TxStatus::PhantomReadConflict;
    }
    TxStatus::Success
}

fn summarize(log: &BlockchainLog, commit_time: &[u64], proposals: &[Proposal], early_aborted: usize) -> PerfSummary {
    let mut counts: BTreeMap<TxStatus, usize> = TxStatus::ALL.iter().map(|s| (*s, 0)).collect();
    let mut latency_sum = 0.0;
    for (tx, &t) in log.transactions.iter().zip(commit_time) {
        *counts.get_mut(&tx.status).unwrap() += 1;
        if tx.status == TxStatus::Success {
            latency_sum += t as f64 / 1000.0 - tx.client_timestamp as f64;
        }
    }
    let n = log.len();
    let successes = counts[&TxStatus::Success];
    let first = proposals.first().map_or(0, |p| p.ts_us);
    let last = commit_time.last().copied().unwrap_or(first);
    let duration_s = last.saturating_sub(first) as f64 / 1e6;
    PerfSummary {
        n,
        successes,
        throughput: if duration_s > 0.0 { successes as f64 / duration_s } else { 0.0 },
        success_rate: if n > 0 { successes as f64 / n as f64 } else { 0.0 },
        avg_latency_ms: if successes > 0 { latency_sum / successes as f64 } else { 0.0 },
        counts,
        early_aborted,
        blocks: log.blocks.len(),
        duration_s,
    }
}
