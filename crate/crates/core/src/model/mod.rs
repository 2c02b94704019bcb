//! Canonical data model shared by every stage of the pipeline.

pub mod canonical;
mod policy;
mod recommendation;
mod record;
mod thresholds;
mod validate;

pub use canonical::{read_canonical_csv, to_canonical_string, write_canonical_csv, CanonicalError};
pub use policy::{EndorsementPolicy, PolicyError};
pub use recommendation::*;
pub use record::*;
pub use thresholds::{ThresholdError, Thresholds};
pub use validate::*;
