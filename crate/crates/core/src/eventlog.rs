//! Process-mining event logs built from a blockchain log.
//!
//! The case identifier comes from a "common element" shared by related
//! transactions: either a function-argument position or a class of keys that
//! share a prefix. Commit order stands in for the event timestamp.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::canonical::{escape_token, unescape_token};
use crate::model::*;

pub const ORPHAN_CASE: &str = "__orphan__";
pub const EVENTLOG_CSV_COLUMNS: [&str; 5] = ["case_id", "activity", "commit_order", "status", "tx_type"];

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("the log is empty")]
    Empty,
    #[error("no candidate case field covers at least half of the transactions (best: {best} at {coverage:.3})")]
    Unsuitable { best: String, coverage: f64 },
    #[error("bad case field `{0}` (expected argN or prefix:<p>)")]
    BadCaseField(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Format { line: u64, msg: String },
}

/// Where a transaction's case value comes from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "source", content = "id", rename_all = "snake_case")]
pub enum CaseSource {
    Argument(usize),
    KeyPrefix(String),
}

impl fmt::Display for CaseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseSource::Argument(i) => write!(f, "arg{i}"),
            CaseSource::KeyPrefix(p) => write!(f, "prefix:{p}"),
        }
    }
}

impl FromStr for CaseSource {
    type Err = EventLogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(p) = s.strip_prefix("prefix:") {
            return Ok(CaseSource::KeyPrefix(p.to_string()));
        }
        s.strip_prefix("arg")
            .and_then(|n| n.parse().ok())
            .map(CaseSource::Argument)
            .ok_or_else(|| EventLogError::BadCaseField(s.to_string()))
    }
}

/// Prefix class of a key: everything up to the last separator or letter/digit boundary.
pub fn key_prefix(key: &str) -> &str {
    let chars: Vec<(usize, char)> = key.char_indices().collect();
    let mut cut = 0;
    for (i, &(pos, c)) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            cut = pos + c.len_utf8();
        } else if i > 0 {
            let prev = chars[i - 1].1;
            let boundary = (prev.is_alphabetic() && c.is_numeric()) || (prev.is_numeric() && c.is_alphabetic());
            if boundary {
                cut = pos;
            }
        }
    }
    if cut == 0 {
        key
    } else {
        &key[..cut]
    }
}

impl CaseSource {
    /// The case value this source yields for `tx`, if present.
    pub fn value_of<'a>(&self, tx: &'a TransactionRecord) -> Option<&'a str> {
        match self {
            CaseSource::Argument(i) => tx.function_arguments.get(*i).map(String::as_str),
            CaseSource::KeyPrefix(p) => tx.accessed_keys().into_iter().find(|k| key_prefix(k) == p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseField {
    pub source: CaseSource,
    pub coverage: f64,
    pub distinct_values: usize,
}

/// Every candidate with its coverage and number of distinct values, best first.
pub fn score_candidates(log: &BlockchainLog) -> Vec<CaseField> {
    let mut values: BTreeMap<CaseSource, (usize, std::collections::HashSet<&str>)> = BTreeMap::new();
    for tx in &log.transactions {
        for (i, a) in tx.function_arguments.iter().enumerate() {
            let e = values.entry(CaseSource::Argument(i)).or_default();
            e.0 += 1;
            e.1.insert(a);
        }
        // one hit per prefix class per transaction, value = smallest such key
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for k in tx.accessed_keys() {
            seen.entry(key_prefix(k)).or_insert(k);
        }
        for (p, k) in seen {
            let e = values.entry(CaseSource::KeyPrefix(p.to_string())).or_default();
            e.0 += 1;
            e.1.insert(k);
        }
    }
    let n = log.len().max(1) as f64;
    let mut out: Vec<CaseField> = values
        .into_iter()
        .map(|(source, (hits, distinct))| CaseField {
            source,
            coverage: hits as f64 / n,
            distinct_values: distinct.len(),
        })
        .collect();
    // coverage, then distinct values, then argument positions before key prefixes
    out.sort_by(|a, b| {
        b.coverage
            .total_cmp(&a.coverage)
            .then(b.distinct_values.cmp(&a.distinct_values))
            .then(a.source.cmp(&b.source))
    });
    out
}

pub fn derive_case_field(log: &BlockchainLog) -> Result<CaseField, EventLogError> {
    if log.is_empty() {
        return Err(EventLogError::Empty);
    }
    let best = score_candidates(log).into_iter().next();
    match best {
        Some(f) if f.coverage >= 0.5 => Ok(f),
        Some(f) => Err(EventLogError::Unsuitable {
            best: f.source.to_string(),
            coverage: f.coverage,
        }),
        None => Err(EventLogError::Unsuitable {
            best: "none".into(),
            coverage: 0.0,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub commit_order: u64,
    pub status: TxStatus,
    pub tx_type: TxType,
}

impl Event {
    fn of(tx: &TransactionRecord) -> Self {
        Event {
            activity: tx.activity_name.clone(),
            commit_order: tx.commit_order,
            status: tx.status,
            tx_type: tx.tx_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    /// The common-element value shared by the trace's events.
    pub value: String,
    pub events: Vec<Event>,
}

/// Traces indexed by dense CaseID, plus the reserved orphan trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub case_field: CaseSource,
    pub traces: Vec<Trace>,
    pub orphans: Vec<Event>,
}

impl EventLog {
    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum::<usize>() + self.orphans.len()
    }

    /// Activity sequences of the non-orphan traces.
    pub fn activity_traces(&self) -> impl Iterator<Item = Vec<&str>> {
        self.traces
            .iter()
            .map(|t| t.events.iter().map(|e| e.activity.as_str()).collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub successes_only: bool,
}

pub fn build_event_log(log: &BlockchainLog, case_field: &CaseSource) -> EventLog {
    build_event_log_with(log, case_field, BuildOptions::default())
}

pub fn build_event_log_with(log: &BlockchainLog, case_field: &CaseSource, opts: BuildOptions) -> EventLog {
    let mut ordered: Vec<&TransactionRecord> = log
        .transactions
        .iter()
        .filter(|t| !opts.successes_only || !t.status.is_failure())
        .collect();
    ordered.sort_by_key(|t| t.commit_order);
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut traces: Vec<Trace> = Vec::new();
    let mut orphans = Vec::new();
    for tx in ordered {
        match case_field.value_of(tx) {
            Some(v) => {
                let id = *ids.entry(v).or_insert_with(|| {
                    traces.push(Trace {
                        value: v.to_string(),
                        events: Vec::new(),
                    });
                    traces.len() - 1
                });
                traces[id].events.push(Event::of(tx));
            }
            None => orphans.push(Event::of(tx)),
        }
    }
    EventLog {
        case_field: case_field.clone(),
        traces,
        orphans,
    }
}

pub fn write_eventlog_csv<W: Write>(el: &EventLog, mut out: W) -> Result<(), EventLogError> {
    writeln!(out, "#case_field {}", escape_token(&el.case_field.to_string()))?;
    for (id, t) in el.traces.iter().enumerate() {
        writeln!(out, "#case {id} {}", escape_token(&t.value))?;
    }
    let mut rows: Vec<(String, &Event)> = el
        .traces
        .iter()
        .enumerate()
        .flat_map(|(id, t)| t.events.iter().map(move |e| (id.to_string(), e)))
        .chain(el.orphans.iter().map(|e| (ORPHAN_CASE.to_string(), e)))
        .collect();
    rows.sort_by_key(|(_, e)| e.commit_order);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(EVENTLOG_CSV_COLUMNS)?;
    for (case, e) in rows {
        w.write_record([
            case.as_str(),
            &e.activity,
            &e.commit_order.to_string(),
            e.status.as_str(),
            e.tx_type.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn eventlog_csv_string(el: &EventLog) -> String {
    let mut buf = Vec::new();
    write_eventlog_csv(el, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

pub fn read_eventlog_csv<R: Read>(mut input: R) -> Result<EventLog, EventLogError> {
    let fmt_err = |line, msg: String| EventLogError::Format { line, msg };
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut case_field = None;
    let mut traces: Vec<Trace> = Vec::new();
    let mut offset = 0;
    let mut line_no = 0u64;
    for line in text.split_inclusive('\n') {
        if !line.starts_with('#') {
            break;
        }
        line_no += 1;
        offset += line.len();
        let line = line.trim_end_matches(['\n', '\r']);
        if let Some(f) = line.strip_prefix("#case_field ") {
            let f = unescape_token(f).map_err(|e| fmt_err(line_no, e))?;
            case_field = Some(f.parse()?);
        } else if let Some(body) = line.strip_prefix("#case ") {
            let (id, value) = body
                .split_once(' ')
                .ok_or_else(|| fmt_err(line_no, "expected `#case <id> <value>`".into()))?;
            if id.parse::<usize>().ok() != Some(traces.len()) {
                return Err(fmt_err(line_no, format!("case ids must be dense, got {id}")));
            }
            traces.push(Trace {
                value: unescape_token(value).map_err(|e| fmt_err(line_no, e))?,
                events: Vec::new(),
            });
        }
    }
    let case_field = case_field.ok_or_else(|| fmt_err(1, "missing #case_field line".into()))?;
    let mut reader = csv::Reader::from_reader(&text.as_bytes()[offset..]);
    if reader.headers()?.iter().ne(EVENTLOG_CSV_COLUMNS.iter().copied()) {
        return Err(fmt_err(line_no + 1, "header does not match event-log columns".into()));
    }
    let mut orphans = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = line_no + 2 + i as u64;
        if row.len() != 5 {
            return Err(fmt_err(line, format!("expected 5 columns, found {}", row.len())));
        }
        let event = Event {
            activity: row[1].to_string(),
            commit_order: row[2].parse().map_err(|_| fmt_err(line, "bad commit_order".into()))?,
            status: row[3].parse().map_err(|e| fmt_err(line, e))?,
            tx_type: row[4].parse().map_err(|e| fmt_err(line, e))?,
        };
        if &row[0] == ORPHAN_CASE {
            orphans.push(event);
        } else {
            let id: usize = row[0].parse().map_err(|_| fmt_err(line, "bad case_id".into()))?;
            traces
                .get_mut(id)
                .ok_or_else(|| fmt_err(line, format!("undeclared case {id}")))?
                .events
                .push(event);
        }
    }
    Ok(EventLog {
        case_field,
        traces,
        orphans,
    })
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Commit order as a synthetic timestamp: one millisecond per ledger position.
fn synthetic_time(commit_order: u64) -> String {
    let base = chrono::NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid base date");
    let t = base + chrono::Duration::milliseconds(commit_order as i64);
    format!("{}+00:00", t.format("%Y-%m-%dT%H:%M:%S%.3f"))
}

fn write_event<W: Write>(out: &mut W, e: &Event) -> std::io::Result<()> {
    writeln!(out, "    <event>")?;
    writeln!(out, "      <string key=\"concept:name\" value=\"{}\"/>", xml_escape(&e.activity))?;
    writeln!(out, "      <date key=\"time:timestamp\" value=\"{}\"/>", synthetic_time(e.commit_order))?;
    writeln!(out, "      <int key=\"commit_order\" value=\"{}\"/>", e.commit_order)?;
    writeln!(out, "      <string key=\"status\" value=\"{}\"/>", e.status)?;
    writeln!(out, "      <string key=\"tx_type\" value=\"{}\"/>", e.tx_type)?;
    writeln!(out, "    </event>")
}

pub fn write_xes<W: Write>(el: &EventLog, mut out: W) -> Result<(), EventLogError> {
    let o = &mut out;
    writeln!(o, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>")?;
    writeln!(
        o,
        "<log xes.version=\"1.0\" xes.features=\"nested-attributes\" xmlns=\"http://www.xes-standard.org/\">"
    )?;
    writeln!(
        o,
        "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>"
    )?;
    writeln!(
        o,
        "  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>"
    )?;
    writeln!(o, "  <global scope=\"trace\">")?;
    writeln!(o, "    <string key=\"concept:name\" value=\"__INVALID__\"/>")?;
    writeln!(o, "  </global>")?;
    writeln!(o, "  <global scope=\"event\">")?;
    writeln!(o, "    <string key=\"concept:name\" value=\"__INVALID__\"/>")?;
    writeln!(o, "    <date key=\"time:timestamp\" value=\"{}\"/>", synthetic_time(0))?;
    writeln!(o, "  </global>")?;
    writeln!(o, "  <classifier name=\"Activity\" keys=\"concept:name\"/>")?;
    writeln!(
        o,
        "  <string key=\"case_field\" value=\"{}\"/>",
        xml_escape(&el.case_field.to_string())
    )?;
    let traces = el
        .traces
        .iter()
        .enumerate()
        .map(|(id, t)| (id.to_string(), t.value.as_str(), &t.events))
        .chain((!el.orphans.is_empty()).then(|| (ORPHAN_CASE.to_string(), "", &el.orphans)));
    for (name, value, events) in traces {
        writeln!(o, "  <trace>")?;
        writeln!(o, "    <string key=\"concept:name\" value=\"{}\"/>", xml_escape(&name))?;
        writeln!(o, "    <string key=\"case_value\" value=\"{}\"/>", xml_escape(value))?;
        for e in events {
            write_event(o, e)?;
        }
        writeln!(o, "  </trace>")?;
    }
    writeln!(o, "</log>")?;
    Ok(())
}

pub fn xes_string(el: &EventLog) -> String {
    let mut buf = Vec::new();
    write_xes(el, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(co: u64, act: &str, args: &[&str], keys: &[&str]) -> TransactionRecord {
        TransactionRecord {
            client_timestamp: co,
            activity_name: act.into(),
            function_arguments: args.iter().map(|s| s.to_string()).collect(),
            endorsers: Default::default(),
            invoker: Invoker {
                client: "c".into(),
                org: "o".into(),
            },
            read_set: keys.iter().map(|k| KeyVersion::new(*k, 0)).collect(),
            write_set: vec![],
            range_reads: vec![],
            status: TxStatus::Success,
            tx_type: TxType::Read,
            commit_order: co,
            block_number: 0,
        }
    }

    fn log(txs: Vec<TransactionRecord>) -> BlockchainLog {
        BlockchainLog {
            config: None,
            transactions: txs,
            blocks: vec![],
        }
    }

    #[test]
    fn prefixes() {
        assert_eq!(key_prefix("product_42"), "product_");
        assert_eq!(key_prefix("employee1"), "employee");
        assert_eq!(key_prefix("c1/music_7"), "c1/music_");
        assert_eq!(key_prefix("parties"), "parties");
        assert_eq!(key_prefix("k000123_5"), "k000123_");
    }

    #[test]
    fn single_argument_log() {
        let l = log((0..4).map(|i| tx(i, "A", &[&format!("v{i}")], &[])).collect());
        let f = derive_case_field(&l).unwrap();
        assert_eq!(f.source, CaseSource::Argument(0));
        assert_eq!(f.coverage, 1.0);
    }

    #[test]
    fn unsuitable_log() {
        let l = log(vec![tx(0, "A", &["x"], &[]), tx(1, "B", &[], &[]), tx(2, "C", &[], &[])]);
        assert!(matches!(derive_case_field(&l), Err(EventLogError::Unsuitable { .. })));
    }

    #[test]
    fn two_products_three_activities() {
        let mut txs = Vec::new();
        for (i, act) in ["PushASN", "Ship", "Unload"].iter().enumerate() {
            for p in 0..2u64 {
                let key = format!("product_{p}");
                txs.push(tx(i as u64 * 2 + p, act, &[], &[&key]));
            }
        }
        let l = log(txs);
        let f = derive_case_field(&l).unwrap();
        assert_eq!(f.source, CaseSource::KeyPrefix("product_".into()));
        let el = build_event_log(&l, &f.source);
        assert_eq!(el.traces.len(), 2);
        assert!(el.traces.iter().all(|t| t.events.len() == 3));
        let back = read_eventlog_csv(eventlog_csv_string(&el).as_bytes()).unwrap();
        assert_eq!(back, el);
    }

    #[test]
    fn orphans_are_kept() {
        let l = log(vec![tx(0, "A", &["p"], &[]), tx(1, "A", &["p"], &[]), tx(2, "B", &[], &[])]);
        let el = build_event_log(&l, &CaseSource::Argument(0));
        assert_eq!(el.orphans.len(), 1);
        assert_eq!(el.event_count(), 3);
        let back = read_eventlog_csv(eventlog_csv_string(&el).as_bytes()).unwrap();
        assert_eq!(back, el);
        assert_eq!(xes_string(&el).matches("<trace>").count(), 2);
    }

    #[test]
    fn case_field_syntax() {
        assert_eq!("arg2".parse::<CaseSource>().unwrap(), CaseSource::Argument(2));
        assert_eq!(
            "prefix:a/b_".parse::<CaseSource>().unwrap(),
            CaseSource::KeyPrefix("a/b_".into())
        );
        assert!("column3".parse::<CaseSource>().is_err());
    }
}
