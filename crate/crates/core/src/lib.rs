//! Blockchain-log analysis: ingestion, metrics, process mining, optimization
//! recommendations and a deterministic execute-order-validate simulator.

pub mod eventlog;
pub mod ingest;
pub mod metrics;
pub mod miner;
pub mod model;
pub mod recommend;
pub mod sim;

pub use model::*;
