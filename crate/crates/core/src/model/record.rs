use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Reserved write value marking a key deletion.
pub const TOMBSTONE: &str = "__DELETED__";

/// Validation outcome recorded on the ledger for a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Success,
    MvccReadConflict,
    PhantomReadConflict,
    EndorsementPolicyFailure,
}

impl TxStatus {
    pub const ALL: [TxStatus; 4] = [
        TxStatus::Success,
        TxStatus::MvccReadConflict,
        TxStatus::PhantomReadConflict,
        TxStatus::EndorsementPolicyFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TxStatus::Success => "success",
            TxStatus::MvccReadConflict => "mvcc_read_conflict",
            TxStatus::PhantomReadConflict => "phantom_read_conflict",
            TxStatus::EndorsementPolicyFailure => "endorsement_policy_failure",
        }
    }

    pub fn is_failure(self) -> bool {
        self != TxStatus::Success
    }

    /// Read-set validation failures, point or range.
    pub fn is_mvcc(self) -> bool {
        matches!(self, TxStatus::MvccReadConflict | TxStatus::PhantomReadConflict)
    }
}

impl fmt::Display for TxStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TxStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TxStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown transaction status `{s}`"))
    }
}

/// Transaction type derived from the read-write set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxType {
    Read,
    Write,
    Update,
    RangeRead,
    Delete,
}

impl TxType {
    pub const ALL: [TxType; 5] = [
        TxType::Read,
        TxType::Write,
        TxType::Update,
        TxType::RangeRead,
        TxType::Delete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TxType::Read => "read",
            TxType::Write => "write",
            TxType::Update => "update",
            TxType::RangeRead => "range_read",
            TxType::Delete => "delete",
        }
    }
}

impl fmt::Display for TxType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TxType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TxType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown transaction type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Invoker {
    pub client: String,
    pub org: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyVersion {
    pub key: String,
    pub version: u64,
}

impl KeyVersion {
    pub fn new(key: impl Into<String>, version: u64) -> Self {
        KeyVersion {
            key: key.into(),
            version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyWrite {
    pub key: String,
    pub value: String,
}

impl KeyWrite {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        KeyWrite {
            key: key.into(),
            value: value.into(),
        }
    }

    pub fn is_delete(&self) -> bool {
        self.value == TOMBSTONE
    }
}

/// A range query over `[start_key, end_key)` and the keys it observed at execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RangeRead {
    pub start_key: String,
    pub end_key: String,
    pub observed: Vec<KeyVersion>,
}

impl RangeRead {
    pub fn contains(&self, key: &str) -> bool {
        key >= self.start_key.as_str() && key < self.end_key.as_str()
    }
}

/// One ledger entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub client_timestamp: u64,
    pub activity_name: String,
    pub function_arguments: Vec<String>,
    pub endorsers: BTreeSet<String>,
    pub invoker: Invoker,
    pub read_set: Vec<KeyVersion>,
    pub write_set: Vec<KeyWrite>,
    pub range_reads: Vec<RangeRead>,
    pub status: TxStatus,
    pub tx_type: TxType,
    pub commit_order: u64,
    pub block_number: u64,
}

impl TransactionRecord {
    pub fn read_keys(&self) -> impl Iterator<Item = &str> {
        self.read_set.iter().map(|r| r.key.as_str())
    }

    pub fn write_keys(&self) -> impl Iterator<Item = &str> {
        self.write_set.iter().map(|w| w.key.as_str())
    }

    /// Keys read point-wise or observed by a range query.
    pub fn all_read_keys(&self) -> BTreeSet<&str> {
        self.read_keys()
            .chain(
                self.range_reads
                    .iter()
                    .flat_map(|r| r.observed.iter().map(|kv| kv.key.as_str())),
            )
            .collect()
    }

    pub fn write_key_set(&self) -> BTreeSet<&str> {
        self.write_keys().collect()
    }

    /// Every key the transaction touched: point reads, writes and range observations.
    pub fn accessed_keys(&self) -> BTreeSet<&str> {
        let mut keys = self.all_read_keys();
        keys.extend(self.write_keys());
        keys
    }

    /// Organization part of each endorser identifier (`Org1.peer0` -> `Org1`).
    pub fn endorsing_orgs(&self) -> BTreeSet<&str> {
        self.endorsers.iter().map(|e| endorser_org(e)).collect()
    }
}

/// Organization prefix of an org-qualified endorser id.
pub fn endorser_org(endorser: &str) -> &str {
    endorser.split_once('.').map_or(endorser, |(org, _)| org)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutReason {
    Count,
    Timeout,
    Flush,
}

impl CutReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CutReason::Count => "count",
            CutReason::Timeout => "timeout",
            CutReason::Flush => "flush",
        }
    }
}

impl FromStr for CutReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count" => Ok(CutReason::Count),
            "timeout" => Ok(CutReason::Timeout),
            "flush" => Ok(CutReason::Flush),
            other => Err(format!("unknown block cut reason `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub block_number: u64,
    pub tx_commit_orders: Vec<u64>,
    pub cut_reason: CutReason,
}

/// Orderer configuration echoed into the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub block_count: u64,
    pub block_timeout_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endorsement_policy: Option<String>,
}

impl NetworkConfig {
    pub fn block_timeout_s(&self) -> f64 {
        self.block_timeout_ms as f64 / 1000.0
    }
}

/// A ledger in commit order plus its block boundaries and configuration echo.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockchainLog {
    pub config: Option<NetworkConfig>,
    pub transactions: Vec<TransactionRecord>,
    pub blocks: Vec<Block>,
}

impl BlockchainLog {
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Rebuilds `blocks` from the records' block numbers, keeping known cut reasons.
    pub fn rebuild_blocks(&mut self, reason_of: impl Fn(u64) -> CutReason) {
        let mut blocks: Vec<Block> = Vec::new();
        for tx in &self.transactions {
            match blocks.last_mut() {
                Some(b) if b.block_number == tx.block_number => b.tx_commit_orders.push(tx.commit_order),
                _ => blocks.push(Block {
                    block_number: tx.block_number,
                    tx_commit_orders: vec![tx.commit_order],
                    cut_reason: reason_of(tx.block_number),
                }),
            }
        }
        self.blocks = blocks;
    }
}
