//! Raw block-dump ingestion.
//!
//! A raw dump is newline-delimited JSON, one block per line:
//!
//! ```text
//! {"raw_v":1,"block_number":0,"transactions":[{"timestamp_ms":0,"kind":"config","config":{...}}]}
//! {"raw_v":1,"block_number":1,"cut_reason":"count","transactions":[{"timestamp_ms":12,"kind":"application",
//!   "function":"Ship","args":["product_1"],"endorsers":["Org1.peer0"],
//!   "invoker":{"client":"Org1.client0","org":"Org1"},
//!   "rwset":{"reads":[{"key":"product_1","version":3}],"writes":[...],"range_reads":[]},
//!   "validation_code":"MVCC_READ_CONFLICT"}]}
//! ```
//!
//! [`preprocess`] drops configuration transactions, assigns commit orders in
//! ledger order and derives each transaction's type.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;

pub const RAW_DUMP_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("block {block_index}: field `{path}`: {msg}")]
    Parse {
        block_index: usize,
        path: String,
        msg: String,
    },
    #[error("block {block_index}: unsupported raw_v {version}")]
    Version { block_index: usize, version: u32 },
    #[error("block {block_index}: block number {got} does not follow {prev}")]
    BlockOrder { block_index: usize, prev: u64, got: u64 },
    #[error("block {block_number} tx {tx_index}: application transaction lacks {what}")]
    Missing {
        block_number: u64,
        tx_index: usize,
        what: &'static str,
    },
    #[error("read set, write set and range reads are all empty")]
    EmptyReadWriteSet,
    #[error("block {block_number} tx {tx_index}: {source}")]
    Tx {
        block_number: u64,
        tx_index: usize,
        #[source]
        source: Box<IngestError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawTxKind {
    Application,
    Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationCode {
    #[serde(rename = "VALID")]
    Valid,
    #[serde(rename = "MVCC_READ_CONFLICT")]
    MvccReadConflict,
    #[serde(rename = "PHANTOM_READ_CONFLICT", alias = "PHANTOM")]
    PhantomReadConflict,
    #[serde(rename = "ENDORSEMENT_POLICY_FAILURE")]
    EndorsementPolicyFailure,
}

impl From<ValidationCode> for TxStatus {
    fn from(code: ValidationCode) -> Self {
        match code {
            ValidationCode::Valid => TxStatus::Success,
            ValidationCode::MvccReadConflict => TxStatus::MvccReadConflict,
            ValidationCode::PhantomReadConflict => TxStatus::PhantomReadConflict,
            ValidationCode::EndorsementPolicyFailure => TxStatus::EndorsementPolicyFailure,
        }
    }
}

impl From<TxStatus> for ValidationCode {
    fn from(status: TxStatus) -> Self {
        match status {
            TxStatus::Success => ValidationCode::Valid,
            TxStatus::MvccReadConflict => ValidationCode::MvccReadConflict,
            TxStatus::PhantomReadConflict => ValidationCode::PhantomReadConflict,
            TxStatus::EndorsementPolicyFailure => ValidationCode::EndorsementPolicyFailure,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRwSet {
    #[serde(default)]
    pub reads: Vec<KeyVersion>,
    #[serde(default)]
    pub writes: Vec<KeyWrite>,
    #[serde(default)]
    pub range_reads: Vec<RangeRead>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTransaction {
    pub timestamp_ms: u64,
    pub kind: RawTxKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub function: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub endorsers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invoker: Option<Invoker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rwset: Option<RawRwSet>,
    pub validation_code: ValidationCode,
    /// Orderer settings carried by configuration transactions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<NetworkConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBlock {
    pub raw_v: u32,
    pub block_number: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_reason: Option<CutReason>,
    pub transactions: Vec<RawTransaction>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawBlockDump {
    pub blocks: Vec<RawBlock>,
}

impl RawBlockDump {
    pub fn transaction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.transactions.len()).sum()
    }
}

/// Streams blocks out of an NDJSON dump, one line at a time.
pub struct RawBlockReader<R> {
    lines: std::io::Lines<R>,
    index: usize,
    prev: Option<u64>,
}

impl<R: BufRead> RawBlockReader<R> {
    pub fn new(reader: R) -> Self {
        RawBlockReader {
            lines: reader.lines(),
            index: 0,
            prev: None,
        }
    }

    fn parse_line(&mut self, line: &str) -> Result<RawBlock, IngestError> {
        let block_index = self.index;
        let de = &mut serde_json::Deserializer::from_str(line);
        let block: RawBlock = serde_path_to_error::deserialize(de).map_err(|e| IngestError::Parse {
            block_index,
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        if block.raw_v != RAW_DUMP_VERSION {
            return Err(IngestError::Version {
                block_index,
                version: block.raw_v,
            });
        }
        if let Some(prev) = self.prev {
            if block.block_number <= prev {
                return Err(IngestError::BlockOrder {
                    block_index,
                    prev,
                    got: block.block_number,
                });
            }
        }
        self.prev = Some(block.block_number);
        Ok(block)
    }
}

impl<R: BufRead> Iterator for RawBlockReader<R> {
    type Item = Result<RawBlock, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            if line.trim().is_empty() {
                continue;
            }
            let out = self.parse_line(&line);
            self.index += 1;
            return Some(out);
        }
    }
}

pub fn parse_raw_blocks<R: BufRead>(reader: R) -> Result<RawBlockDump, IngestError> {
    let blocks = RawBlockReader::new(reader).collect::<Result<_, _>>()?;
    Ok(RawBlockDump { blocks })
}

pub fn write_raw_dump<W: Write>(dump: &RawBlockDump, mut out: W) -> Result<(), IngestError> {
    for block in &dump.blocks {
        serde_json::to_writer(&mut out, block).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Classifies a transaction by its read-write set.
///
/// Range reads win, then deletes (tombstone writes); a transaction without
/// writes is a read, one without reads is a blind write, anything else is an
/// update (including reads and writes on disjoint keys).
pub fn derive_transaction_type(
    read_set: &[KeyVersion],
    write_set: &[KeyWrite],
    range_reads: &[RangeRead],
) -> Result<TxType, IngestError> {
    if read_set.is_empty() && write_set.is_empty() && range_reads.is_empty() {
        return Err(IngestError::EmptyReadWriteSet);
    }
    Ok(if !range_reads.is_empty() {
        TxType::RangeRead
    } else if write_set.iter().any(KeyWrite::is_delete) {
        TxType::Delete
    } else if write_set.is_empty() {
        TxType::Read
    } else if read_set.is_empty() {
        TxType::Write
    } else {
        TxType::Update
    })
}

/// Incremental form of [`preprocess`] for dumps that do not fit in memory.
#[derive(Debug, Default)]
pub struct Preprocessor {
    log: BlockchainLog,
}

impl Preprocessor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_block(&mut self, block: &RawBlock) -> Result<(), IngestError> {
        let mut orders = Vec::new();
        for (tx_index, raw) in block.transactions.iter().enumerate() {
            if raw.kind == RawTxKind::Config {
                if let Some(cfg) = &raw.config {
                    self.log.config = Some(cfg.clone());
                }
                continue;
            }
            let missing = |what| IngestError::Missing {
                block_number: block.block_number,
                tx_index,
                what,
            };
            let rw = raw.rwset.as_ref().ok_or_else(|| missing("a read-write payload"))?;
            let invoker = raw.invoker.clone().ok_or_else(|| missing("an invoker"))?;
            let tx_type = derive_transaction_type(&rw.reads, &rw.writes, &rw.range_reads).map_err(|e| {
                IngestError::Tx {
                    block_number: block.block_number,
                    tx_index,
                    source: Box::new(e),
                }
            })?;
            let commit_order = self.log.transactions.len() as u64;
            orders.push(commit_order);
            self.log.transactions.push(TransactionRecord {
                client_timestamp: raw.timestamp_ms,
                activity_name: raw.function.clone(),
                function_arguments: raw.args.clone(),
                endorsers: raw.endorsers.iter().cloned().collect(),
                invoker,
                read_set: rw.reads.clone(),
                write_set: rw.writes.clone(),
                range_reads: rw.range_reads.clone(),
                status: raw.validation_code.into(),
                tx_type,
                commit_order,
                block_number: block.block_number,
            });
        }
        if !orders.is_empty() {
            self.log.blocks.push(Block {
                block_number: block.block_number,
                tx_commit_orders: orders,
                cut_reason: block.cut_reason.unwrap_or(CutReason::Count),
            });
        }
        Ok(())
    }

    pub fn finish(self) -> BlockchainLog {
        self.log
    }
}

/// Builds the canonical log: config transactions removed, commit orders `0..n`.
pub fn preprocess(raw: &RawBlockDump) -> Result<BlockchainLog, IngestError> {
    let mut p = Preprocessor::new();
    for block in &raw.blocks {
        p.push_block(block)?;
    }
    Ok(p.finish())
}

/// Streams a dump straight into a canonical log.
pub fn ingest_stream<R: BufRead>(reader: R) -> Result<BlockchainLog, IngestError> {
    let mut p = Preprocessor::new();
    for block in RawBlockReader::new(reader) {
        p.push_block(&block?)?;
    }
    Ok(p.finish())
}

/// Renders a log back into raw form, with the configuration in a leading genesis block.
pub fn to_raw_dump(log: &BlockchainLog) -> RawBlockDump {
    let mut blocks = Vec::new();
    let first_block = log.blocks.first().map_or(1, |b| b.block_number);
    if let Some(cfg) = &log.config {
        blocks.push(RawBlock {
            raw_v: RAW_DUMP_VERSION,
            block_number: first_block.saturating_sub(1),
            cut_reason: None,
            transactions: vec![RawTransaction {
                timestamp_ms: 0,
                kind: RawTxKind::Config,
                function: String::new(),
                args: Vec::new(),
                endorsers: Vec::new(),
                invoker: None,
                rwset: None,
                validation_code: ValidationCode::Valid,
                config: Some(cfg.clone()),
            }],
        });
    }
    let by_order: std::collections::HashMap<u64, &TransactionRecord> =
        log.transactions.iter().map(|t| (t.commit_order, t)).collect();
    for b in &log.blocks {
        blocks.push(RawBlock {
            raw_v: RAW_DUMP_VERSION,
            block_number: b.block_number,
            cut_reason: Some(b.cut_reason),
            transactions: b
                .tx_commit_orders
                .iter()
                .filter_map(|co| by_order.get(co))
                .map(|tx| RawTransaction {
                    timestamp_ms: tx.client_timestamp,
                    kind: RawTxKind::Application,
                    function: tx.activity_name.clone(),
                    args: tx.function_arguments.clone(),
                    endorsers: tx.endorsers.iter().cloned().collect(),
                    invoker: Some(tx.invoker.clone()),
                    rwset: Some(RawRwSet {
                        reads: tx.read_set.clone(),
                        writes: tx.write_set.clone(),
                        range_reads: tx.range_reads.clone(),
                    }),
                    validation_code: tx.status.into(),
                    config: None,
                })
                .collect(),
        });
    }
    RawBlockDump { blocks }
}
