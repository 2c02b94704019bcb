//! Chaincode stand-ins: each operation executes against a world-state
//! snapshot and yields a read-write set.

use super::config::{ContractVariant, SimConfig, UseCase};
use super::state::WorldState;
use crate::model::{KeyVersion, KeyWrite, RangeRead};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Read(u32),
    Insert { base: u32, seq: u64 },
    Update(u32),
    RangeRead { start: u32, len: u32 },

    PushAsn(u32),
    Ship(u32),
    QueryAsn(u32),
    Unload(u32),
    QueryProducts(u32),
    UpdateAuditInfo(u32),

    Play(u32),
    CalcRevenue(u32),
    ViewMetaData(u32),
    QueryRightHolders(u32),
    CreateMusic(u32),

    Grant(u32),
    Revoke(u32),
    QueryRecords(u32),

    QueryParties,
    Vote { voter: u32, party: u32 },
    SeeResults,
    EndElection,

    AppStep { app: u32, step: &'static str },
    HandleApplication { app: u32, employee: u32 },
}

pub fn generic_key(i: u32) -> String {
    format!("k{i:06}")
}

impl Op {
    pub fn activity(&self) -> &'static str {
        match self {
            Op::Read(_) => "Read",
            Op::Insert { .. } => "Insert",
            Op::Update(_) => "Update",
            Op::RangeRead { .. } => "RangeRead",
            Op::PushAsn(_) => "PushASN",
            Op::Ship(_) => "Ship",
            Op::QueryAsn(_) => "QueryASN",
            Op::Unload(_) => "Unload",
            Op::QueryProducts(_) => "QueryProducts",
            Op::UpdateAuditInfo(_) => "UpdateAuditInfo",
            Op::Play(_) => "Play",
            Op::CalcRevenue(_) => "calcRevenue",
            Op::ViewMetaData(_) => "viewMetaData",
            Op::QueryRightHolders(_) => "queryRightHolders",
            Op::CreateMusic(_) => "create",
            Op::Grant(_) => "grant",
            Op::Revoke(_) => "revoke",
            Op::QueryRecords(_) => "queryRecords",
            Op::QueryParties => "queryParties",
            Op::Vote { .. } => "Vote",
            Op::SeeResults => "seeResults",
            Op::EndElection => "endElection",
            Op::AppStep { step, .. } => step,
            Op::HandleApplication { .. } => "W_HandleApplication",
        }
    }

    pub fn args(&self) -> Vec<String> {
        match self {
            Op::Read(k) | Op::Update(k) => vec![generic_key(*k)],
            Op::Insert { base, seq } => vec![format!("{}_{seq:06}", generic_key(*base))],
            Op::RangeRead { start, len } => vec![generic_key(*start), generic_key(start + len)],
            Op::PushAsn(p)
            | Op::Ship(p)
            | Op::QueryAsn(p)
            | Op::Unload(p)
            | Op::QueryProducts(p)
            | Op::UpdateAuditInfo(p) => vec![format!("P{p}")],
            Op::Play(m) | Op::CalcRevenue(m) | Op::ViewMetaData(m) | Op::QueryRightHolders(m) | Op::CreateMusic(m) => {
                vec![format!("M{m}")]
            }
            Op::Grant(p) | Op::Revoke(p) | Op::QueryRecords(p) => vec![format!("H{p}")],
            Op::QueryParties | Op::SeeResults | Op::EndElection => vec![],
            Op::Vote { voter, party } => vec![format!("V{voter}"), format!("party{party}")],
            Op::AppStep { app, .. } => vec![format!("A{app}")],
            Op::HandleApplication { app, employee } => vec![format!("A{app}"), format!("E{employee}")],
        }
    }
}

/// Read-write set produced by executing an operation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exec {
    pub reads: Vec<KeyVersion>,
    pub writes: Vec<KeyWrite>,
    pub ranges: Vec<RangeRead>,
    /// The execution took the uncommon read-only path of an activity that normally updates.
    pub anomalous: bool,
}

struct Ctx<'a> {
    state: &'a WorldState,
    exec: Exec,
}

impl<'a> Ctx<'a> {
    fn read(&mut self, key: &str) -> Option<&'a str> {
        let (value, kv) = self.state.read(key);
        if !self.exec.reads.iter().any(|r| r.key == key) {
            self.exec.reads.push(kv);
        }
        value
    }

    fn write(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        self.exec.writes.retain(|w| w.key != key);
        self.exec.writes.push(KeyWrite::new(key, value));
    }

    fn range(&mut self, start: String, end: String) -> usize {
        let observed = self.state.scan(&start, &end);
        let n = observed.len();
        self.exec.ranges.push(RangeRead {
            start_key: start,
            end_key: end,
            observed,
        });
        n
    }
}

fn count(v: Option<&str>) -> u64 {
    v.and_then(|s| s.parse().ok()).unwrap_or(0)
}

/// Executes `op` against `state`. `seq` is a run-unique sequence number used in written values.
pub fn execute(op: &Op, variant: ContractVariant, state: &WorldState, seq: u64) -> Exec {
    let mut c = Ctx {
        state,
        exec: Exec::default(),
    };
    let partitioned = variant == ContractVariant::Partitioned;
    let ns = |contract: u8, key: String| if partitioned { format!("c{contract}/{key}") } else { key };
    match op {
        Op::Read(k) => {
            c.read(&generic_key(*k));
        }
        Op::Insert { base, seq: s } => c.write(format!("{}_{s:06}", generic_key(*base)), format!("v{seq}")),
        Op::Update(k) => {
            let key = generic_key(*k);
            c.read(&key);
            c.write(key, format!("v{seq}"));
        }
        Op::RangeRead { start, len } => {
            c.range(generic_key(*start), generic_key(start + len));
        }

        Op::PushAsn(p) => {
            let key = format!("product_{p}");
            c.read(&key);
            c.write(key, "asn");
        }
        Op::Ship(p) => {
            let key = format!("product_{p}");
            if c.read(&key) == Some("asn") {
                c.write(key, "shipped");
            } else {
                c.exec.anomalous = true;
            }
        }
        Op::Unload(p) => {
            let key = format!("product_{p}");
            if c.read(&key) == Some("shipped") {
                c.write(key, "unloaded");
            } else {
                c.exec.anomalous = true;
            }
        }
        Op::QueryAsn(p) | Op::QueryProducts(p) => {
            c.read(&format!("product_{p}"));
        }
        Op::UpdateAuditInfo(p) => {
            c.read(&format!("product_{p}"));
            c.write(format!("audit_{p}"), format!("audit{seq}"));
        }

        Op::Play(m) => {
            if variant == ContractVariant::DeltaWrite {
                c.write(format!("music_{m}_delta_{seq:08}"), "1");
            } else {
                let key = ns(1, format!("music_{m}"));
                let plays = count(c.read(&key));
                c.write(key, (plays + 1).to_string());
            }
        }
        Op::CalcRevenue(m) => {
            let plays = count(c.read(&ns(2, format!("music_{m}"))));
            let deltas = if variant == ContractVariant::DeltaWrite {
                c.range(format!("music_{m}_delta_"), format!("music_{m}_delta_~"))
            } else {
                0
            };
            c.write(ns(2, format!("revenue_{m}")), format!("rev:{}", plays + deltas as u64));
        }
        Op::ViewMetaData(m) => {
            c.read(&ns(2, format!("music_{m}")));
        }
        Op::QueryRightHolders(m) => {
            c.read(&ns(2, format!("music_{m}")));
            c.read(&ns(2, format!("revenue_{m}")));
        }
        Op::CreateMusic(m) => {
            if partitioned {
                c.write(format!("c1/music_{m}"), "0");
                c.write(format!("c2/music_{m}"), "0");
            } else {
                c.write(format!("music_{m}"), "0");
            }
        }

        Op::Grant(p) => {
            let key = format!("patient_{p}");
            c.read(&key);
            c.write(key, format!("granted:{seq}"));
        }
        Op::Revoke(p) => {
            let key = format!("patient_{p}");
            let granted = c.read(&key).is_some_and(|v| v.starts_with("granted"));
            if granted {
                c.write(key, format!("revoked:{seq}"));
            } else {
                c.exec.anomalous = true;
            }
        }
        Op::QueryRecords(p) => {
            c.read(&format!("patient_{p}"));
        }

        Op::QueryParties => {
            c.read("parties");
        }
        Op::Vote { voter, party } => {
            if variant == ContractVariant::AlteredDataModel {
                let key = format!("vote_{voter}");
                c.read(&key);
                c.write(key, format!("{{party:{party}}}"));
            } else {
                let key = format!("tally_{party}");
                let votes = c
                    .read(&key)
                    .and_then(|v| v.strip_prefix("{votes:"))
                    .and_then(|v| v.split(',').next())
                    .and_then(|v| v.parse::<u64>().ok())
                    .unwrap_or(0);
                c.write(key, format!("{{votes:{},last:V{voter}}}", votes + 1));
            }
        }
        Op::SeeResults => {
            c.read("results");
        }
        Op::EndElection => {
            c.read("election");
            c.write("election", "closed");
            c.write("results", format!("final:{seq}"));
        }

        Op::AppStep { app, step } => {
            let key = format!("app_{app}");
            if *step == "A_Create" {
                c.write(key, "A_Create");
            } else {
                c.read(&key);
                c.write(key, *step);
            }
        }
        Op::HandleApplication { app, employee } => {
            let key = if variant == ContractVariant::AlteredDataModel {
                format!("worklist_{app}")
            } else {
                format!("employee_{employee}")
            };
            c.read(&key);
            c.write(key, format!("worklist:A{app}"));
        }
    }
    c.exec
}

/// Genesis state for a configuration.
pub fn initial_state(cfg: &SimConfig) -> WorldState {
    let mut s = WorldState::new();
    let n = cfg.key_space_size as u32;
    match cfg.use_case {
        UseCase::Generic => (0..n).for_each(|i| s.preload(generic_key(i), "v0")),
        UseCase::Scm => (0..n).for_each(|p| s.preload(format!("product_{p}"), "created")),
        UseCase::Drm => {
            for m in 0..n {
                if cfg.contract_variant == ContractVariant::Partitioned {
                    s.preload(format!("c1/music_{m}"), "0");
                    s.preload(format!("c2/music_{m}"), "0");
                } else {
                    s.preload(format!("music_{m}"), "0");
                }
            }
        }
        UseCase::Ehr => (0..n).for_each(|p| s.preload(format!("patient_{p}"), "none")),
        UseCase::Dv => {
            s.preload("parties", (0..n).map(|p| format!("party{p}")).collect::<Vec<_>>().join(","));
            s.preload("election", "open");
        }
        UseCase::Lap => (0..n).for_each(|e| s.preload(format!("employee_{e}"), "worklist:")),
    }
    s
}
