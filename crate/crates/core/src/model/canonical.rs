//! Canonical blockchain-log CSV.
//!
//! Layout: a `#`-prefixed preamble (format version, orderer configuration,
//! block cut reasons) followed by a header row and one row per transaction.
//! List cells hold `;`-separated tokens: `key@version` for reads,
//! `key=value` for writes and `start|end|k@v,k@v` for range reads.
//! Delimiter characters inside tokens are percent-escaped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use thiserror::Error;

use super::record::*;

pub const CANONICAL_CSV_VERSION: u32 = 1;
const MAGIC: &str = "#ledgerlens-canonical-csv v";

pub const COLUMNS: [&str; 13] = [
    "client_ts_ms",
    "activity",
    "args",
    "endorsers",
    "invoker_client",
    "invoker_org",
    "read_set",
    "write_set",
    "range_reads",
    "status",
    "tx_type",
    "commit_order",
    "block_number",
];

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Format { line: u64, msg: String },
}

fn format_err(line: u64, msg: impl Into<String>) -> CanonicalError {
    CanonicalError::Format {
        line,
        msg: msg.into(),
    }
}

const ESCAPED: [char; 8] = ['%', ';', '@', '=', '|', ',', '\n', '\r'];

/// Percent-escapes the token delimiters; an empty token becomes `%_`.
pub fn escape_token(s: &str) -> String {
    if s.is_empty() {
        return "%_".to_string();
    }
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if ESCAPED.contains(&c) {
            out.push_str(&format!("%{:02X}", c as u32));
        } else {
            out.push(c);
        }
    }
    out
}

pub fn unescape_token(s: &str) -> Result<String, String> {
    if s == "%_" {
        return Ok(String::new());
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let hex: String = chars.by_ref().take(2).collect();
        let code = u8::from_str_radix(&hex, 16).map_err(|_| format!("bad escape `%{hex}` in `{s}`"))?;
        out.push(code as char);
    }
    Ok(out)
}

fn join<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(";")
}

fn split(cell: &str) -> impl Iterator<Item = &str> {
    cell.split(';').filter(|_| !cell.is_empty())
}

fn encode_kv(kv: &KeyVersion) -> String {
    format!("{}@{}", escape_token(&kv.key), kv.version)
}

fn decode_kv(tok: &str) -> Result<KeyVersion, String> {
    let (k, v) = tok.rsplit_once('@').ok_or_else(|| format!("expected key@version, got `{tok}`"))?;
    Ok(KeyVersion {
        key: unescape_token(k)?,
        version: v.parse().map_err(|_| format!("bad version in `{tok}`"))?,
    })
}

fn encode_range(r: &RangeRead) -> String {
    let observed: Vec<String> = r.observed.iter().map(encode_kv).collect();
    format!(
        "{}|{}|{}",
        escape_token(&r.start_key),
        escape_token(&r.end_key),
        observed.join(",")
    )
}

fn decode_range(tok: &str) -> Result<RangeRead, String> {
    let mut parts = tok.splitn(3, '|');
    let (Some(start), Some(end), Some(obs)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected start|end|observed, got `{tok}`"));
    };
    let observed = obs
        .split(',')
        .filter(|_| !obs.is_empty())
        .map(decode_kv)
        .collect::<Result<_, _>>()?;
    Ok(RangeRead {
        start_key: unescape_token(start)?,
        end_key: unescape_token(end)?,
        observed,
    })
}

pub fn encode_row(tx: &TransactionRecord) -> [String; 13] {
    [
        tx.client_timestamp.to_string(),
        tx.activity_name.clone(),
        join(tx.function_arguments.iter().map(|a| escape_token(a))),
        join(tx.endorsers.iter().map(|e| escape_token(e))),
        tx.invoker.client.clone(),
        tx.invoker.org.clone(),
        join(tx.read_set.iter().map(encode_kv)),
        join(
            tx.write_set
                .iter()
                .map(|w| format!("{}={}", escape_token(&w.key), escape_token(&w.value))),
        ),
        join(tx.range_reads.iter().map(encode_range)),
        tx.status.as_str().to_string(),
        tx.tx_type.as_str().to_string(),
        tx.commit_order.to_string(),
        tx.block_number.to_string(),
    ]
}

pub fn decode_row(row: &csv::StringRecord) -> Result<TransactionRecord, String> {
    if row.len() != COLUMNS.len() {
        return Err(format!("expected {} columns, found {}", COLUMNS.len(), row.len()));
    }
    let num = |i: usize| -> Result<u64, String> {
        row[i]
            .parse()
            .map_err(|_| format!("column {} is not an integer: `{}`", COLUMNS[i], &row[i]))
    };
    let write_set = split(&row[7])
        .map(|tok| {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, got `{tok}`"))?;
            Ok(KeyWrite {
                key: unescape_token(k)?,
                value: unescape_token(v)?,
            })
        })
        .collect::<Result<_, String>>()?;
    Ok(TransactionRecord {
        client_timestamp: num(0)?,
        activity_name: row[1].to_string(),
        function_arguments: split(&row[2]).map(unescape_token).collect::<Result<_, _>>()?,
        endorsers: split(&row[3])
            .map(unescape_token)
            .collect::<Result<BTreeSet<_>, _>>()?,
        invoker: Invoker {
            client: row[4].to_string(),
            org: row[5].to_string(),
        },
        read_set: split(&row[6]).map(decode_kv).collect::<Result<_, _>>()?,
        write_set,
        range_reads: split(&row[8]).map(decode_range).collect::<Result<_, _>>()?,
        status: row[9].parse()?,
        tx_type: row[10].parse()?,
        commit_order: num(11)?,
        block_number: num(12)?,
    })
}

/// Writes `log` as canonical CSV.
pub fn write_canonical_csv<W: Write>(log: &BlockchainLog, mut out: W) -> Result<(), CanonicalError> {
    writeln!(out, "{MAGIC}{CANONICAL_CSV_VERSION}")?;
    if let Some(cfg) = &log.config {
        write!(
            out,
            "#config block_count={} block_timeout_ms={}",
            cfg.block_count, cfg.block_timeout_ms
        )?;
        if let Some(p) = &cfg.endorsement_policy {
            write!(out, " endorsement_policy={}", escape_token(p))?;
        }
        writeln!(out)?;
    }
    for b in &log.blocks {
        writeln!(out, "#block {} {}", b.block_number, b.cut_reason.as_str())?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(COLUMNS)?;
    for tx in &log.transactions {
        w.write_record(encode_row(tx))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_canonical_string(log: &BlockchainLog) -> String {
    let mut buf = Vec::new();
    write_canonical_csv(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("canonical csv is utf-8")
}

fn parse_config(line: u64, body: &str) -> Result<NetworkConfig, CanonicalError> {
    let mut cfg = NetworkConfig {
        block_count: 0,
        block_timeout_ms: 0,
        endorsement_policy: None,
    };
    for field in body.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| format_err(line, format!("bad config field `{field}`")))?;
        let int = || v.parse::<u64>().map_err(|_| format_err(line, format!("bad integer for {k}")));
        match k {
            "block_count" => cfg.block_count = int()?,
            "block_timeout_ms" => cfg.block_timeout_ms = int()?,
            "endorsement_policy" => {
                cfg.endorsement_policy = Some(unescape_token(v).map_err(|e| format_err(line, e))?)
            }
            _ => return Err(format_err(line, format!("unknown config field `{k}`"))),
        }
    }
    Ok(cfg)
}

/// Reads a canonical CSV log. Block lists are rebuilt from the rows.
pub fn read_canonical_csv<R: Read>(mut input: R) -> Result<BlockchainLog, CanonicalError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut log = BlockchainLog::default();
    let mut reasons: BTreeMap<u64, CutReason> = BTreeMap::new();
    let mut offset = 0;
    let mut line_no = 0u64;
    for line in text.split_inclusive('\n') {
        if !line.starts_with('#') {
            break;
        }
        line_no += 1;
        offset += line.len();
        let line = line.trim_end_matches(['\n', '\r']);
        if let Some(v) = line.strip_prefix(MAGIC) {
            let version: u32 = v.trim().parse().map_err(|_| format_err(line_no, "bad format version"))?;
            if version != CANONICAL_CSV_VERSION {
                return Err(format_err(line_no, format!("unsupported format version {version}")));
            }
        } else if let Some(body) = line.strip_prefix("#config ") {
            log.config = Some(parse_config(line_no, body)?);
        } else if let Some(body) = line.strip_prefix("#block ") {
            let (n, reason) = body
                .split_once(' ')
                .ok_or_else(|| format_err(line_no, "expected `#block <number> <reason>`"))?;
            let n: u64 = n.parse().map_err(|_| format_err(line_no, "bad block number"))?;
            reasons.insert(n, reason.parse().map_err(|e: String| format_err(line_no, e))?);
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(&text.as_bytes()[offset..]);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(COLUMNS.iter().copied()) {
        return Err(format_err(line_no + 1, "header does not match the canonical columns"));
    }
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = line_no + 2 + i as u64;
        log.transactions.push(decode_row(&row).map_err(|e| format_err(line, e))?);
    }
    log.rebuild_blocks(|n| reasons.get(&n).copied().unwrap_or(CutReason::Count));
    Ok(log)
}
