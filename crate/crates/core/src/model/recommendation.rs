use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::miner::AnomalyFinding;

/// Abstraction level a recommendation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    User,
    Data,
    System,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::User => "user",
            Level::Data => "data",
            Level::System => "system",
        }
    }
}

/// The nine optimization rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationKind {
    ActivityReordering,
    ProcessModelPruning,
    TransactionRateControl,
    DeltaWrites,
    SmartContractPartitioning,
    DataModelAlteration,
    BlockSizeAdaptation,
    EndorserRestructuring,
    ClientResourceBoost,
}

impl RecommendationKind {
    pub const ALL: [RecommendationKind; 9] = [
        RecommendationKind::ActivityReordering,
        RecommendationKind::ProcessModelPruning,
        RecommendationKind::TransactionRateControl,
        RecommendationKind::DeltaWrites,
        RecommendationKind::SmartContractPartitioning,
        RecommendationKind::DataModelAlteration,
        RecommendationKind::BlockSizeAdaptation,
        RecommendationKind::EndorserRestructuring,
        RecommendationKind::ClientResourceBoost,
    ];

    pub fn level(self) -> Level {
        use RecommendationKind::*;
        match self {
            ActivityReordering | ProcessModelPruning | TransactionRateControl => Level::User,
            DeltaWrites | SmartContractPartitioning | DataModelAlteration => Level::Data,
            BlockSizeAdaptation | EndorserRestructuring | ClientResourceBoost => Level::System,
        }
    }

    pub fn as_str(self) -> &'static str {
        use RecommendationKind::*;
        match self {
            ActivityReordering => "activity_reordering",
            ProcessModelPruning => "process_model_pruning",
            TransactionRateControl => "transaction_rate_control",
            DeltaWrites => "delta_writes",
            SmartContractPartitioning => "smart_contract_partitioning",
            DataModelAlteration => "data_model_alteration",
            BlockSizeAdaptation => "block_size_adaptation",
            EndorserRestructuring => "endorser_restructuring",
            ClientResourceBoost => "client_resource_boost",
        }
    }

    pub fn title(self) -> &'static str {
        use RecommendationKind::*;
        match self {
            ActivityReordering => "Activity reordering",
            ProcessModelPruning => "Process model pruning",
            TransactionRateControl => "Transaction rate control",
            DeltaWrites => "Delta writes",
            SmartContractPartitioning => "Smart contract partitioning",
            DataModelAlteration => "Data model alteration",
            BlockSizeAdaptation => "Block size adaptation",
            EndorserRestructuring => "Endorser restructuring",
            ClientResourceBoost => "Client resource boost",
        }
    }
}

impl fmt::Display for RecommendationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecommendationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RecommendationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown recommendation kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Peer,
    Client,
    Org,
}

/// Supporting facts for a fired rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    ReorderablePair {
        /// Activity whose transactions failed.
        victim: String,
        /// Activity whose committed writes invalidated them.
        culprit: String,
        failures: u64,
        /// Sample `(culprit, victim)` commit-order pairs.
        witnesses: Vec<(u64, u64)>,
    },
    Anomaly(AnomalyFinding),
    Interval {
        index: u64,
        start_s: f64,
        trd: f64,
        frd: f64,
    },
    DeltaWrite {
        activity: String,
        key: String,
        failed_tx: u64,
        next_tx: u64,
        failed_value: String,
        next_value: String,
    },
    Hotkey {
        key: String,
        failed_accesses: u64,
        activities: Vec<String>,
    },
    BlockSize {
        tr: f64,
        b_sizeavg: f64,
        block_count: Option<u64>,
        block_timeout_s: Option<f64>,
    },
    Endorser {
        id: String,
        granularity: Granularity,
        count: u64,
        share: f64,
    },
    Invoker {
        id: String,
        granularity: Granularity,
        count: u64,
        share: f64,
    },
}

impl Evidence {
    pub fn first_commit_order(&self) -> Option<u64> {
        match self {
            Evidence::ReorderablePair { witnesses, .. } => witnesses.iter().map(|w| w.0.min(w.1)).min(),
            Evidence::Anomaly(a) => a.witnesses.iter().copied().min(),
            Evidence::DeltaWrite { failed_tx, .. } => Some(*failed_tx),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneGuard {
    pub activity: String,
    pub expected: crate::model::TxType,
    pub anomalous: crate::model::TxType,
    /// Activities observed immediately before the anomalous executions.
    pub preceded_by: Vec<String>,
}

/// Structured change the user (or the simulator) can apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SuggestedAction {
    ReorderActivities {
        /// Activities to reschedule after the conflicting ones.
        defer: Vec<String>,
        pairs: Vec<(String, String)>,
    },
    EarlyAbort {
        guards: Vec<PruneGuard>,
    },
    CapSendRate {
        tps: f64,
    },
    ConvertToDeltaWrites {
        targets: Vec<(String, String)>,
    },
    SplitContract {
        hotkeys: Vec<String>,
        activities: Vec<String>,
    },
    AlterDataModel {
        hotkeys: Vec<String>,
        activities: Vec<String>,
    },
    SetBlockSize {
        block_count: u64,
        block_timeout_s: f64,
    },
    RestructureEndorsement {
        policy: String,
        even_distribution: bool,
    },
    BoostClients {
        orgs: Vec<String>,
        clients: Vec<String>,
        factor: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub kind: RecommendationKind,
    pub level: Level,
    pub evidence: Vec<Evidence>,
    pub suggested_action: SuggestedAction,
    pub explanation: String,
}

impl Recommendation {
    pub fn new(
        kind: RecommendationKind,
        evidence: Vec<Evidence>,
        suggested_action: SuggestedAction,
        explanation: String,
    ) -> Self {
        debug_assert!(!evidence.is_empty(), "{kind} fired without evidence");
        Recommendation {
            kind,
            level: kind.level(),
            evidence,
            suggested_action,
            explanation,
        }
    }

    pub fn sort_key(&self) -> (Level, RecommendationKind, u64) {
        let first = self
            .evidence
            .iter()
            .filter_map(Evidence::first_commit_order)
            .min()
            .unwrap_or(u64::MAX);
        (self.level, self.kind, first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_taxonomy() {
        use RecommendationKind::*;
        let user = [ActivityReordering, ProcessModelPruning, TransactionRateControl];
        let data = [DeltaWrites, SmartContractPartitioning, DataModelAlteration];
        let system = [BlockSizeAdaptation, EndorserRestructuring, ClientResourceBoost];
        assert!(user.iter().all(|k| k.level() == Level::User));
        assert!(data.iter().all(|k| k.level() == Level::Data));
        assert!(system.iter().all(|k| k.level() == Level::System));
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in RecommendationKind::ALL {
            assert_eq!(k.as_str().parse::<RecommendationKind>().unwrap(), k);
        }
    }
}
