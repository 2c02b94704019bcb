//! Process discovery over event logs: directly-follows graphs, alpha
//! relations and nets, and detection of activities with inconsistent
//! transaction types.

mod alpha;
mod anomaly;
mod dfg;
mod dot;

pub use alpha::{alpha_mine, AlphaNet, Place};
pub use anomaly::{detect_anomalous_paths, detect_anomalous_paths_in, AnomalyFinding, TRACE_START};
pub use dfg::{compute_footprint, mine_dfg, mine_dfg_from_traces, DirectlyFollowsGraph, FootprintMatrix, Relation};
pub use dot::{alpha_to_dot, dfg_to_dot};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MinerError {
    #[error("the event log has no non-empty trace")]
    EmptyLog,
}
