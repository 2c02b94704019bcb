use ledgerlens::eventlog::{build_event_log, derive_case_field, xes_string, CaseSource};
use ledgerlens::ingest::{ingest_stream, to_raw_dump, write_raw_dump};
use ledgerlens::metrics::compute_metrics;
use ledgerlens::sim::{preset, run, PRESET_NAMES};
use ledgerlens::*;

fn small(name: &str) -> sim::SimConfig {
    let mut cfg = preset(name).unwrap();
    cfg.n_transactions = cfg.n_transactions.min(1500);
    cfg
}

#[test]
fn raw_dump_ingests_back_to_the_same_ledger() {
    for name in ["uniform", "rangeread_heavy", "scm", "ehr"] {
        let (log, _) = run(&small(name)).unwrap();
        let mut buf = Vec::new();
        write_raw_dump(&to_raw_dump(&log), &mut buf).unwrap();
        let back = ingest_stream(buf.as_slice()).unwrap();
        assert_eq!(to_canonical_string(&back), to_canonical_string(&log), "{name}");
    }
}

#[test]
fn every_preset_produces_a_valid_ledger() {
    for name in PRESET_NAMES {
        let cfg = small(name);
        let (log, perf) = run(&cfg).unwrap();
        assert!(validate_log(&log).is_empty(), "{name}");
        assert_eq!(perf.n + perf.early_aborted, cfg.n_transactions, "{name}");
        let m = compute_metrics(&log, &Thresholds::default());
        assert_eq!(m.tx_count as usize, log.len());
    }
}

#[test]
fn xes_is_well_formed() {
    let (log, _) = run(&small("scm")).unwrap();
    let field = derive_case_field(&log).unwrap();
    let el = build_event_log(&log, &field.source);
    let xes = xes_string(&el);
    let mut reader = quick_xml::Reader::from_str(&xes);
    let (mut traces, mut events, mut depth) = (0, 0, 0i32);
    loop {
        match reader.read_event().expect("valid xml") {
            quick_xml::events::Event::Start(e) => {
                depth += 1;
                match e.name().as_ref() {
                    b"trace" => traces += 1,
                    b"event" => events += 1,
                    _ => {}
                }
            }
            quick_xml::events::Event::End(_) => depth -= 1,
            quick_xml::events::Event::Eof => break,
            _ => {}
        }
    }
    assert_eq!(depth, 0);
    assert_eq!(traces, el.traces.len() + usize::from(!el.orphans.is_empty()));
    assert_eq!(events, el.event_count());
}

#[test]
fn scm_cases_follow_products() {
    let (log, _) = run(&small("scm")).unwrap();
    let field = derive_case_field(&log).unwrap();
    assert_eq!(field.source, CaseSource::Argument(0));
}
