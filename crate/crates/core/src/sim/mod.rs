//! Deterministic execute-order-validate simulator and workload generator.

mod config;
mod contract;
mod engine;
mod experiment;
mod optimize;
mod scenarios;
mod state;
mod workload;

pub use config::{ConfigError, ContractVariant, SimConfig, UseCase, WorkloadType};
pub use contract::{execute, generic_key, initial_state, Exec, Op};
pub use engine::{run, PerfSummary};
pub use experiment::{closed_loop, render_loop_table, LoopError, LoopLeg, LoopReport};
pub use optimize::{apply_all, apply_optimization, OptimizeError};
pub use scenarios::{builtin_scenarios, preset, PRESET_NAMES};
pub use state::WorldState;
pub use workload::{generate_workload, Proposal};

use std::collections::BTreeSet;

use crate::model::EndorsementPolicy;

/// Structural policy satisfaction by a set of endorsing organizations.
pub fn evaluate_policy<S: AsRef<str> + Ord>(policy: &EndorsementPolicy, endorsing_orgs: &BTreeSet<S>) -> bool {
    policy.evaluate(endorsing_orgs)
}
