use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::record::BlockchainLog;
use crate::ingest::derive_transaction_type;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub commit_order: Option<u64>,
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.commit_order {
            Some(co) => write!(f, "commit_order {co}: {} ({})", self.invariant, self.detail),
            None => write!(f, "{} ({})", self.invariant, self.detail),
        }
    }
}

pub const COMMIT_ORDER_UNIQUE: &str = "commit_order uniqueness";
pub const COMMIT_ORDER_INCREASING: &str = "commit_order increasing";
pub const TX_TYPE_DERIVATION: &str = "tx_type matches read-write set";
pub const PHANTOM_HAS_RANGE: &str = "phantom conflict has range reads";
pub const BLOCK_MONOTONE: &str = "block_number non-decreasing";
pub const BLOCK_NON_EMPTY: &str = "block has at least one transaction";
pub const BLOCK_CONTIGUOUS: &str = "block commit orders contiguous";
pub const BLOCK_MEMBERSHIP: &str = "block lists match transaction block numbers";

/// Checks every structural invariant of a log. Violations are data, never errors.
pub fn validate_log(log: &BlockchainLog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |co: Option<u64>, invariant, detail: String| {
        out.push(Violation {
            commit_order: co,
            invariant,
            detail,
        })
    };

    let mut prev: Option<(u64, u64)> = None;
    for tx in &log.transactions {
        let co = tx.commit_order;
        if let Some((prev_co, prev_block)) = prev {
            if co == prev_co {
                push(Some(co), COMMIT_ORDER_UNIQUE, format!("duplicate commit_order {co}"));
            } else if co < prev_co {
                push(Some(co), COMMIT_ORDER_INCREASING, format!("{co} follows {prev_co}"));
            }
            if tx.block_number < prev_block {
                push(
                    Some(co),
                    BLOCK_MONOTONE,
                    format!("block {} after block {prev_block}", tx.block_number),
                );
            }
        }
        prev = Some((co, tx.block_number));

        match derive_transaction_type(&tx.read_set, &tx.write_set, &tx.range_reads) {
            Ok(t) if t == tx.tx_type => {}
            Ok(t) => push(Some(co), TX_TYPE_DERIVATION, format!("recorded {}, derived {t}", tx.tx_type)),
            Err(e) => push(Some(co), TX_TYPE_DERIVATION, e.to_string()),
        }
        if tx.status == super::TxStatus::PhantomReadConflict && tx.range_reads.is_empty() {
            push(Some(co), PHANTOM_HAS_RANGE, "no range reads recorded".into());
        }
    }

    if !log.blocks.is_empty() || !log.transactions.is_empty() {
        let mut expected: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for tx in &log.transactions {
            expected.entry(tx.block_number).or_default().push(tx.commit_order);
        }
        let position: BTreeMap<u64, usize> = log
            .transactions
            .iter()
            .enumerate()
            .map(|(i, t)| (t.commit_order, i))
            .collect();
        let mut listed: BTreeMap<u64, &Vec<u64>> = BTreeMap::new();
        for b in &log.blocks {
            if b.tx_commit_orders.is_empty() {
                push(None, BLOCK_NON_EMPTY, format!("block {} is empty", b.block_number));
                continue;
            }
            listed.insert(b.block_number, &b.tx_commit_orders);
            let idx: Vec<Option<&usize>> = b.tx_commit_orders.iter().map(|co| position.get(co)).collect();
            let contiguous = idx.windows(2).all(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => *b == a + 1,
                _ => false,
            });
            if !contiguous || idx.iter().any(Option::is_none) {
                push(
                    b.tx_commit_orders.first().copied(),
                    BLOCK_CONTIGUOUS,
                    format!("block {} is not a contiguous ledger range", b.block_number),
                );
            }
        }
        for (n, orders) in &expected {
            if listed.get(n).map(|l| l.as_slice()) != Some(orders.as_slice()) {
                push(
                    orders.first().copied(),
                    BLOCK_MEMBERSHIP,
                    format!("block {n} listing disagrees with records"),
                );
            }
        }
        for n in listed.keys() {
            if !expected.contains_key(n) {
                push(None, BLOCK_MEMBERSHIP, format!("block {n} lists no matching records"));
            }
        }
    }
    out
}
