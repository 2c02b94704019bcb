//! Named configurations: the synthetic workload types and five use cases.

use super::config::{ContractVariant, SimConfig, UseCase, WorkloadType};

fn use_case(use_case: UseCase, n: usize, rate: f64, keys: usize, skew: f64) -> SimConfig {
    SimConfig {
        use_case,
        n_transactions: n,
        send_rate: rate,
        key_space_size: keys,
        key_skew: skew,
        n_orgs: 4,
        endorsement_policy: "OutOf(1,Org1,Org2,Org3,Org4)".into(),
        contract_variant: ContractVariant::Baseline,
        ..SimConfig::default()
    }
}

/// Preset names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 13] = [
    "default",
    "uniform",
    "read_heavy",
    "insert_heavy",
    "update_heavy",
    "rangeread_heavy",
    "blockcount50",
    "scm",
    "drm",
    "ehr",
    "dv",
    "dv_altered",
    "lap",
];

pub fn preset(name: &str) -> Option<SimConfig> {
    let workload = |w: WorkloadType| SimConfig {
        workload_type: w,
        ..SimConfig::default()
    };
    Some(match name {
        "default" | "uniform" => SimConfig::default(),
        "read_heavy" => workload(WorkloadType::ReadHeavy),
        "insert_heavy" => workload(WorkloadType::InsertHeavy),
        "update_heavy" => workload(WorkloadType::UpdateHeavy),
        "rangeread_heavy" => workload(WorkloadType::RangeReadHeavy),
        "blockcount50" => SimConfig {
            block_count: 50,
            n_transactions: 6000,
            ..SimConfig::default()
        },
        // products, each with four pipeline steps and an occasional extra
        "scm" => use_case(UseCase::Scm, 10_000, 300.0, 2400, 1.0),
        // music tracks, 70% plays
        "drm" => use_case(UseCase::Drm, 10_000, 50.0, 1000, 1.0),
        // patients
        "ehr" => use_case(UseCase::Ehr, 10_000, 300.0, 200, 1.0),
        // parties: 1 000 queries, 5 000 votes, then results and closing
        "dv" => use_case(UseCase::Dv, 6002, 300.0, 6, 1.0),
        "dv_altered" => SimConfig {
            contract_variant: ContractVariant::AlteredDataModel,
            ..preset("dv")?
        },
        // employees handling loan applications
        "lap" => use_case(UseCase::Lap, 20_000, 10.0, 20, 1.5),
        _ => return None,
    })
}

/// Every preset with its name.
pub fn builtin_scenarios() -> Vec<(&'static str, SimConfig)> {
    PRESET_NAMES.iter().map(|n| (*n, preset(n).expect("listed preset"))).collect()
}
