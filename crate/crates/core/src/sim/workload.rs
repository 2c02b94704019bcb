//! Proposal generation: operation mix, send times, invokers and endorser sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;

use super::config::{SimConfig, UseCase, WorkloadType};
use super::contract::Op;
use crate::model::{EndorsementPolicy, Invoker};

/// A transaction proposal as submitted by a client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    /// Client send time in microseconds.
    pub ts_us: u64,
    pub op: Op,
    pub invoker: Invoker,
    /// Org-qualified endorsing peers, e.g. `Org2.peer0`.
    pub endorsers: BTreeSet<String>,
}

// independent RNG streams so that changing one aspect leaves the others intact
const STREAM_OPS: u64 = 1;
const STREAM_JITTER: u64 = 2;
const STREAM_INVOKER: u64 = 3;
const STREAM_ENDORSER: u64 = 4;
const STREAM_FAULT: u64 = 5;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Zipf rank in `0..n` (rank 0 is the most popular).
pub(crate) struct Ranks(Zipf<f64>);

impl Ranks {
    pub(crate) fn new(n: usize, s: f64) -> Self {
        Ranks(Zipf::new(n.max(1) as f64, s).expect("valid zipf parameters"))
    }

    pub(crate) fn draw(&self, r: &mut ChaCha8Rng) -> u32 {
        self.0.sample(r) as u32 - 1
    }
}

/// Evenly spaced send times with one-sided jitter below 20% of the spacing.
fn spaced(start_us: f64, count: usize, rate: f64, jit: &mut ChaCha8Rng) -> Vec<u64> {
    let gap = 1e6 / rate;
    (0..count)
        .map(|i| (start_us + i as f64 * gap + jit.random_range(0.0..0.2) * gap) as u64)
        .collect()
}

/// Keeps the order of `ops` but sends them at the configured rate.
fn restamp(mut ops: Vec<(u64, Op)>, n: usize, rate: f64, jit: &mut ChaCha8Rng) -> Vec<(u64, Op)> {
    ops.sort_by_key(|(ts, _)| *ts);
    ops.truncate(n);
    let times = spaced(0.0, ops.len(), rate, jit);
    times.into_iter().zip(ops.into_iter().map(|(_, op)| op)).collect()
}

/// Builds the ordered proposal list for a configuration.
pub fn generate_workload(cfg: &SimConfig) -> Vec<Proposal> {
    let mut ops = match cfg.use_case {
        UseCase::Generic => generic_ops(cfg),
        UseCase::Scm => scm_ops(cfg),
        UseCase::Drm => drm_ops(cfg),
        UseCase::Ehr => ehr_ops(cfg),
        UseCase::Dv => dv_ops(cfg),
        UseCase::Lap => lap_ops(cfg),
    };
    ops.sort_by_key(|(ts, _)| *ts);
    ops.truncate(cfg.n_transactions);
    if !cfg.defer_activities.is_empty() {
        ops = defer(ops, &cfg.defer_activities);
    }
    assign_parties(cfg, ops)
}

/// Moves deferred activities behind all others, reusing the original send-time slots.
fn defer(ops: Vec<(u64, Op)>, deferred: &[String]) -> Vec<(u64, Op)> {
    let slots: Vec<u64> = ops.iter().map(|(ts, _)| *ts).collect();
    let (late, early): (Vec<Op>, Vec<Op>) = ops
        .into_iter()
        .map(|(_, op)| op)
        .partition(|op| deferred.iter().any(|d| d == op.activity()));
    slots.into_iter().zip(early.into_iter().chain(late)).collect()
}

fn assign_parties(cfg: &SimConfig, ops: Vec<(u64, Op)>) -> Vec<Proposal> {
    let orgs = cfg.orgs();
    let policy = cfg.policy().unwrap_or_else(|_| EndorsementPolicy::preset("P3", cfg.n_orgs).unwrap());
    let mut inv_rng = rng(cfg.seed, STREAM_INVOKER);
    let mut end_rng = rng(cfg.seed, STREAM_ENDORSER);
    let mut fault_rng = rng(cfg.seed, STREAM_FAULT);
    let weights: Vec<f64> = (0..orgs.len()).map(|j| (j as f64 + 1.0).powf(-cfg.endorser_skew)).collect();
    let mut next_client: BTreeMap<usize, usize> = BTreeMap::new();

    ops.into_iter()
        .enumerate()
        .map(|(i, (ts_us, op))| {
            let org = if cfg.tx_dist_skew == 0.0 || orgs.len() == 1 {
                i % orgs.len()
            } else if inv_rng.random_bool(cfg.tx_dist_skew) {
                0
            } else {
                1 + inv_rng.random_range(0..orgs.len() - 1)
            };
            let slot = next_client.entry(org).or_insert(0);
            let client = *slot % cfg.clients_of(&orgs[org]);
            *slot += 1;
            let invoker = Invoker {
                client: format!("{}.client{client}", orgs[org]),
                org: orgs[org].clone(),
            };

            let preference: Vec<String> = if cfg.endorser_skew == 0.0 {
                (0..orgs.len()).map(|j| orgs[(i + j) % orgs.len()].clone()).collect()
            } else {
                weighted_order(&weights, &mut end_rng).into_iter().map(|j| orgs[j].clone()).collect()
            };
            let mut endorsing: Vec<String> = policy
                .minimal_endorsers(&preference)
                .unwrap_or_else(|| orgs.iter().cloned().collect())
                .into_iter()
                .collect();
            if cfg.endorsement_fault_rate > 0.0 && fault_rng.random_bool(cfg.endorsement_fault_rate) && endorsing.len() > 1 {
                let drop = fault_rng.random_range(0..endorsing.len());
                endorsing.remove(drop);
            }
            Proposal {
                ts_us,
                op,
                invoker,
                endorsers: endorsing.into_iter().map(|o| format!("{o}.peer0")).collect(),
            }
        })
        .collect()
}

/// Indices drawn without replacement, proportionally to `weights`.
fn weighted_order(weights: &[f64], r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut left: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let total: f64 = left.iter().map(|&j| weights[j]).sum();
        let mut x = r.random_range(0.0..total);
        let mut pick = left.len() - 1;
        for (pos, &j) in left.iter().enumerate() {
            if x < weights[j] {
                pick = pos;
                break;
            }
            x -= weights[j];
        }
        out.push(left.remove(pick));
    }
    out
}

fn generic_ops(cfg: &SimConfig) -> Vec<(u64, Op)> {
    let mut r = rng(cfg.seed, STREAM_OPS);
    let mut jit = rng(cfg.seed, STREAM_JITTER);
    let keys = Ranks::new(cfg.key_space_size, cfg.key_skew);
    let named = match cfg.workload_type {
        WorkloadType::Uniform => None,
        WorkloadType::ReadHeavy => Some(0),
        WorkloadType::InsertHeavy => Some(1),
        WorkloadType::UpdateHeavy => Some(2),
        WorkloadType::RangeReadHeavy => Some(3),
    };
    let times = spaced(0.0, cfg.n_transactions, cfg.send_rate, &mut jit);
    times
        .into_iter()
        .enumerate()
        .map(|(i, ts)| {
            let u: f64 = r.random();
            let kind = match named {
                None => (u * 4.0) as usize,
                Some(n) if u < 0.7 => n,
                // remaining 30% spread evenly over the other three
                Some(n) => {
                    let other = (((u - 0.7) / 0.1) as usize).min(2);
                    if other >= n {
                        other + 1
                    } else {
                        other
                    }
                }
            };
            let k = keys.draw(&mut r);
            let op = match kind.min(3) {
                0 => Op::Read(k),
                1 => Op::Insert { base: k, seq: i as u64 },
                2 => Op::Update(k),
                _ => Op::RangeRead { start: k, len: 10 },
            };
            (ts, op)
        })
        .collect()
}

/// Supply chain: per product PushASN -> Ship -> QueryASN -> Unload with random
/// gaps, plus at most one QueryProducts or UpdateAuditInfo per product.
fn scm_ops(cfg: &SimConfig) -> Vec<(u64, Op)> {
    let mut r = rng(cfg.seed, STREAM_OPS);
    let mut jit = rng(cfg.seed, STREAM_JITTER);
    let products = cfg.key_space_size;
    let per_product = 4.0 + SCM_EXTRA;
    let starts = spaced(0.0, products, cfg.send_rate / per_product, &mut jit);
    // pipeline timing fixes the order; the client then sends at a steady rate
    let mut out = Vec::with_capacity(products * 5);
    for (p, start) in starts.into_iter().enumerate() {
        let p = p as u32;
        let mut t = start as f64;
        let mut times = Vec::with_capacity(4);
        for step in [Op::PushAsn(p), Op::Ship(p), Op::QueryAsn(p), Op::Unload(p)] {
            times.push(t);
            out.push((t as u64, step));
            t += r.random_range(SCM_GAP_S.0..SCM_GAP_S.1) * 1e6;
        }
        if r.random_bool(SCM_EXTRA) {
            let at = r.random_range(times[0]..times[3]) as u64;
            let op = if r.random_bool(0.5) {
                Op::QueryProducts(p)
            } else {
                Op::UpdateAuditInfo(p)
            };
            out.push((at, op));
        }
    }
    restamp(out, cfg.n_transactions, cfg.send_rate, &mut jit)
}

const SCM_EXTRA: f64 = 0.2;
const SCM_GAP_S: (f64, f64) = (0.1, 1.2);

/// Music rights: 70% Play on Zipf-popular tracks; the other functions target the hottest tracks.
fn drm_ops(cfg: &SimConfig) -> Vec<(u64, Op)> {
    let mut r = rng(cfg.seed, STREAM_OPS);
    let mut jit = rng(cfg.seed, STREAM_JITTER);
    let music = cfg.key_space_size.max(1);
    let plays = Ranks::new(music, cfg.key_skew);
    let hot = Ranks::new(DRM_HOT.min(music), cfg.key_skew);
    let mut created = music as u32;
    spaced(0.0, cfg.n_transactions, cfg.send_rate, &mut jit)
        .into_iter()
        .map(|ts| {
            let u: f64 = r.random();
            // 70% plays, the rest split evenly
            let op = if u < 0.70 {
                Op::Play(plays.draw(&mut r))
            } else if u < 0.775 {
                Op::CalcRevenue(hot.draw(&mut r))
            } else if u < 0.85 {
                Op::ViewMetaData(hot.draw(&mut r))
            } else if u < 0.925 {
                Op::QueryRightHolders(hot.draw(&mut r))
            } else {
                created += 1;
                Op::CreateMusic(created - 1)
            };
            (ts, op)
        })
        .collect()
}

const DRM_HOT: usize = 3;

/// Health records: grant and revoke access for patients; queries look at recently changed patients.
fn ehr_ops(cfg: &SimConfig) -> Vec<(u64, Op)> {
    let mut r = rng(cfg.seed, STREAM_OPS);
    let mut jit = rng(cfg.seed, STREAM_JITTER);
    let patients = cfg.key_space_size.max(1) as u32;
    let mut recent: Vec<u32> = Vec::new();
    spaced(0.0, cfg.n_transactions, cfg.send_rate, &mut jit)
        .into_iter()
        .map(|ts| {
            let u: f64 = r.random();
            let op = if u < 0.70 || recent.is_empty() {
                let p = r.random_range(0..patients);
                recent.push(p);
                if recent.len() > EHR_RECENT {
                    recent.remove(0);
                }
                if u < 0.35 {
                    Op::Grant(p)
                } else {
                    Op::Revoke(p)
                }
            } else {
                Op::QueryRecords(recent[r.random_range(0..recent.len())])
            };
            (ts, op)
        })
        .collect()
}

const EHR_RECENT: usize = 5;

/// Voting: a query phase at up to 100 TPS, a vote burst, then results and closing.
fn dv_ops(cfg: &SimConfig) -> Vec<(u64, Op)> {
    let mut r = rng(cfg.seed, STREAM_OPS);
    let mut jit = rng(cfg.seed, STREAM_JITTER);
    let parties = cfg.key_space_size.max(1) as u32;
    let rest = cfg.n_transactions.saturating_sub(DV_TAIL);
    let queries = rest / 6;
    let votes = rest - queries;
    let query_rate = cfg.send_rate.min(100.0);
    let mut out: Vec<(u64, Op)> = spaced(0.0, queries, query_rate, &mut jit)
        .into_iter()
        .map(|ts| (ts, Op::QueryParties))
        .collect();
    let vote_start = queries as f64 * 1e6 / query_rate;
    out.extend(
        spaced(vote_start, votes, cfg.send_rate, &mut jit)
            .into_iter()
            .enumerate()
            .map(|(voter, ts)| {
                (
                    ts,
                    Op::Vote {
                        voter: voter as u32,
                        party: r.random_range(0..parties),
                    },
                )
            }),
    );
    // results are read after the burst has settled
    let tail_start = vote_start + votes as f64 * 1e6 / cfg.send_rate + 5e6;
    let tail = spaced(tail_start, DV_TAIL, 10.0, &mut jit);
    for (j, ts) in tail.into_iter().enumerate() {
        let op = if j == 0 { Op::SeeResults } else { Op::EndElection };
        out.push((ts, op));
    }
    out
}

const DV_TAIL: usize = 2;

const LAP_STEPS: [&str; 9] = [
    "A_Create",
    "A_Submitted",
    "A_Concept",
    "A_Accepted",
    "O_Create",
    "O_Sent",
    "A_Validating",
    "O_Accepted",
    "A_Pending",
];

/// Loan applications: a fixed step sequence per application, with one
/// worklist step that updates the handling employee's record.
fn lap_ops(cfg: &SimConfig) -> Vec<(u64, Op)> {
    let mut r = rng(cfg.seed, STREAM_OPS);
    let mut jit = rng(cfg.seed, STREAM_JITTER);
    let per_app = LAP_STEPS.len() + 1;
    let apps = cfg.n_transactions.div_ceil(per_app);
    let employees = Ranks::new(cfg.key_space_size, cfg.key_skew);
    let starts = spaced(0.0, apps, cfg.send_rate / per_app as f64, &mut jit);
    let mut out = Vec::with_capacity(apps * per_app);
    for (a, start) in starts.into_iter().enumerate() {
        let app = a as u32;
        let mut t = start as f64;
        let handle_after = r.random_range(1..LAP_STEPS.len());
        for (s, step) in LAP_STEPS.iter().enumerate() {
            out.push((t as u64, Op::AppStep { app, step }));
            t += r.random_range(LAP_GAP_S.0..LAP_GAP_S.1) * 1e6;
            if s + 1 == handle_after {
                let employee = employees.draw(&mut r);
                out.push((t as u64, Op::HandleApplication { app, employee }));
                t += r.random_range(LAP_GAP_S.0..LAP_GAP_S.1) * 1e6;
            }
        }
    }
    restamp(out, cfg.n_transactions, cfg.send_rate, &mut jit)
}

const LAP_GAP_S: (f64, f64) = (30.0, 120.0);

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(f: impl FnOnce(&mut SimConfig)) -> SimConfig {
        let mut c = SimConfig::default();
        f(&mut c);
        c
    }

    #[test]
    fn send_times_follow_the_rate() {
        let c = cfg(|c| {
            c.n_transactions = 1000;
            c.send_rate = 100.0;
        });
        let w = generate_workload(&c);
        for (i, p) in w.iter().enumerate() {
            let base = i as u64 * 10_000;
            assert!(p.ts_us >= base && p.ts_us < base + 2_000, "{i}: {}", p.ts_us);
        }
    }

    #[test]
    fn endorsers_always_satisfy_policy() {
        for skew in [0.0, 1.0, 6.0] {
            let c = cfg(|c| {
                c.n_orgs = 4;
                c.endorsement_policy = "P1".into();
                c.endorser_skew = skew;
            });
            let policy = c.policy().unwrap();
            for p in generate_workload(&c) {
                let orgs: BTreeSet<&str> = p.endorsers.iter().map(|e| crate::model::endorser_org(e)).collect();
                assert!(policy.evaluate(&orgs));
            }
        }
    }

    #[test]
    fn deferred_activities_come_last() {
        let c = cfg(|c| {
            c.workload_type = WorkloadType::ReadHeavy;
            c.defer_activities = vec!["Read".into()];
        });
        let w = generate_workload(&c);
        let first_read = w.iter().position(|p| p.op.activity() == "Read").unwrap();
        assert!(w[first_read..].iter().all(|p| p.op.activity() == "Read"));
        assert!(w.windows(2).all(|p| p[0].ts_us <= p[1].ts_us));
    }

    #[test]
    fn scm_pipeline_order() {
        let c = super::super::scenarios::preset("scm").unwrap();
        let w = generate_workload(&c);
        let mut seen: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for p in &w {
            let a = p.op.activity();
            if ["PushASN", "Ship", "QueryASN", "Unload"].contains(&a) {
                seen.entry(p.op.args()[0].clone()).or_default().push(a);
            }
        }
        let full: Vec<_> = seen.values().filter(|v| v.len() == 4).collect();
        assert!(!full.is_empty());
        assert!(full.iter().all(|v| **v == ["PushASN", "Ship", "QueryASN", "Unload"]));
    }
}
