use std::fmt::Write as _;

use serde::Serialize;

use super::Analysis;
use crate::metrics::MetricsReport;
use crate::model::*;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const MAX_TABLE_ROWS: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub markdown: String,
    pub json: String,
}

#[derive(Serialize)]
struct Summary<'a> {
    tx_count: u64,
    failed_count: u64,
    tr: f64,
    tfr: f64,
    b_sizeavg: f64,
    b_count_cfg: Option<u64>,
    b_timeout_cfg_s: Option<f64>,
    hotkeys: &'a std::collections::BTreeSet<String>,
    intra_block_conflicts: u64,
    inter_block_conflicts: u64,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    schema: u32,
    thresholds: &'a Thresholds,
    summary: Summary<'a>,
    recommendations: &'a [Recommendation],
    notes: &'a [String],
}

fn row(ev: &Evidence) -> (Vec<&'static str>, Vec<String>) {
    match ev {
        Evidence::ReorderablePair {
            victim,
            culprit,
            failures,
            witnesses,
        } => (
            vec!["failed activity", "conflicting activity", "failures", "sample (writer, reader)"],
            vec![
                victim.clone(),
                culprit.clone(),
                failures.to_string(),
                witnesses.iter().map(|(a, b)| format!("({a}, {b})")).collect::<Vec<_>>().join(" "),
            ],
        ),
        Evidence::Anomaly(a) => (
            vec!["activity", "expected", "observed", "executions", "preceded by"],
            vec![
                a.activity.clone(),
                a.expected.to_string(),
                a.anomalous.to_string(),
                a.witnesses.len().to_string(),
                a.preceded_by
                    .iter()
                    .map(|(p, n)| format!("{p} ({n})"))
                    .collect::<Vec<_>>()
                    .join(", "),
            ],
        ),
        Evidence::Interval { index, start_s, trd, frd } => (
            vec!["interval", "start (s)", "Trd (TPS)", "Frd (TPS)"],
            vec![index.to_string(), format!("{start_s}"), format!("{trd:.2}"), format!("{frd:.2}")],
        ),
        Evidence::DeltaWrite {
            activity,
            key,
            failed_tx,
            next_tx,
            failed_value,
            next_value,
        } => (
            vec!["activity", "key", "failed tx", "next tx", "values"],
            vec![
                activity.clone(),
                key.clone(),
                failed_tx.to_string(),
                next_tx.to_string(),
                format!("{failed_value} -> {next_value}"),
            ],
        ),
        Evidence::Hotkey {
            key,
            failed_accesses,
            activities,
        } => (
            vec!["hotkey", "failed accesses", "activities"],
            vec![key.clone(), failed_accesses.to_string(), activities.join(", ")],
        ),
        Evidence::BlockSize {
            tr,
            b_sizeavg,
            block_count,
            block_timeout_s,
        } => (
            vec!["Tr (TPS)", "average block size", "block count", "block timeout (s)"],
            vec![
                format!("{tr:.2}"),
                format!("{b_sizeavg:.2}"),
                block_count.map_or("-".into(), |c| c.to_string()),
                block_timeout_s.map_or("-".into(), |s| format!("{s}")),
            ],
        ),
        Evidence::Endorser {
            id,
            granularity,
            count,
            share,
        }
        | Evidence::Invoker {
            id,
            granularity,
            count,
            share,
        } => (
            vec!["id", "granularity", "transactions", "share"],
            vec![
                id.clone(),
                format!("{granularity:?}").to_lowercase(),
                count.to_string(),
                format!("{:.1}%", 100.0 * share),
            ],
        ),
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

/// Markdown and JSON renderings of an analysis. Output is byte-stable for equal input.
pub fn render_report(analysis: &Analysis, m: &MetricsReport, t: &Thresholds) -> Report {
    let mut md = String::new();
    let _ = writeln!(md, "# Optimization report\n");
    let _ = writeln!(md, "| metric | value |\n|---|---|");
    let _ = writeln!(md, "| transactions | {} |", m.tx_count);
    let _ = writeln!(md, "| failed | {} |", m.failed_count);
    let _ = writeln!(md, "| Tr (TPS) | {:.3} |", m.tr);
    let _ = writeln!(md, "| TFr (TPS) | {:.3} |", m.tfr);
    let _ = writeln!(md, "| average block size | {:.3} |", m.b_sizeavg);
    let _ = writeln!(md, "| hotkeys | {} |", m.hk.len());
    let _ = writeln!(
        md,
        "| intra/inter-block conflicts | {}/{} |",
        m.conflict_locality.intra_block, m.conflict_locality.inter_block
    );
    md.push('\n');

    if analysis.recommendations.is_empty() {
        let _ = writeln!(md, "No recommendations: no rule fired under the given thresholds.\n");
    }
    for (i, rec) in analysis.recommendations.iter().enumerate() {
        let _ = writeln!(
            md,
            "## {}. {} ({} level)\n",
            i + 1,
            rec.kind.title(),
            rec.level.as_str()
        );
        let _ = writeln!(md, "{}\n", rec.explanation);
        let action = serde_json::to_string(&rec.suggested_action).expect("serializable");
        let _ = writeln!(md, "Suggested action: `{action}`\n");
        let rows: Vec<_> = rec.evidence.iter().map(row).collect();
        if let Some((headers, _)) = rows.first() {
            let _ = writeln!(md, "| {} |", headers.join(" | "));
            let _ = writeln!(md, "|{}", "---|".repeat(headers.len()));
            for (_, cells) in rows.iter().take(MAX_TABLE_ROWS) {
                let cells: Vec<String> = cells.iter().map(|c| cell(c)).collect();
                let _ = writeln!(md, "| {} |", cells.join(" | "));
            }
            if rows.len() > MAX_TABLE_ROWS {
                let _ = writeln!(md, "\n... {} more evidence rows in the JSON report.", rows.len() - MAX_TABLE_ROWS);
            }
            md.push('\n');
        }
    }
    if !analysis.notes.is_empty() {
        let _ = writeln!(md, "## Notes\n");
        for n in &analysis.notes {
            let _ = writeln!(md, "- {n}");
        }
    }

    let doc = ReportDoc {
        schema: REPORT_SCHEMA_VERSION,
        thresholds: t,
        summary: Summary {
            tx_count: m.tx_count,
            failed_count: m.failed_count,
            tr: m.tr,
            tfr: m.tfr,
            b_sizeavg: m.b_sizeavg,
            b_count_cfg: m.b_count_cfg,
            b_timeout_cfg_s: m.b_timeout_cfg_s,
            hotkeys: &m.hk,
            intra_block_conflicts: m.conflict_locality.intra_block,
            inter_block_conflicts: m.conflict_locality.inter_block,
        },
        recommendations: &analysis.recommendations,
        notes: &analysis.notes,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("serializable");
    json.push('\n');
    Report { markdown: md, json }
}
