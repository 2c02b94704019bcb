//! Maps a recommendation onto the simulator settings that implement it.

use thiserror::Error;

use super::config::{ContractVariant, SimConfig};
use crate::model::{Recommendation, RecommendationKind, SuggestedAction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("{kind} recommendation carries an unexpected action")]
    ActionMismatch { kind: RecommendationKind },
}

/// Returns `cfg` changed the way the recommendation suggests.
pub fn apply_optimization(cfg: &SimConfig, rec: &Recommendation) -> Result<SimConfig, OptimizeError> {
    use RecommendationKind as K;
    use SuggestedAction as A;
    let mut out = cfg.clone();
    let mismatch = || OptimizeError::ActionMismatch { kind: rec.kind };
    match (rec.kind, &rec.suggested_action) {
        (K::ActivityReordering, A::ReorderActivities { defer, .. }) => {
            for a in defer {
                if !out.defer_activities.contains(a) {
                    out.defer_activities.push(a.clone());
                }
            }
        }
        (K::ProcessModelPruning, A::EarlyAbort { .. }) => out.contract_variant = ContractVariant::Pruned,
        (K::TransactionRateControl, A::CapSendRate { tps }) => out.send_rate = *tps,
        (K::DeltaWrites, A::ConvertToDeltaWrites { .. }) => out.contract_variant = ContractVariant::DeltaWrite,
        (K::SmartContractPartitioning, A::SplitContract { .. }) => {
            out.contract_variant = ContractVariant::Partitioned
        }
        (K::DataModelAlteration, A::AlterDataModel { .. }) => {
            out.contract_variant = ContractVariant::AlteredDataModel
        }
        (K::BlockSizeAdaptation, A::SetBlockSize { block_count, block_timeout_s }) => {
            out.block_count = *block_count;
            out.block_timeout_s = *block_timeout_s;
        }
        (K::EndorserRestructuring, A::RestructureEndorsement { .. }) => {
            out.endorsement_policy = "P4".into();
            out.endorser_skew = 0.0;
        }
        (K::ClientResourceBoost, A::BoostClients { orgs, factor, .. }) => {
            for org in orgs {
                let f = out.client_boost.entry(org.clone()).or_insert(1);
                *f = f.saturating_mul(*factor as usize);
            }
        }
        _ => return Err(mismatch()),
    }
    Ok(out)
}

/// Applies several recommendations in order.
pub fn apply_all(cfg: &SimConfig, recs: &[Recommendation]) -> Result<SimConfig, OptimizeError> {
    recs.iter().try_fold(cfg.clone(), |c, r| apply_optimization(&c, r))
}
