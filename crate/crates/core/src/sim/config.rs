use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EndorsementPolicy, PolicyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown setting `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {value}")]
    BadValue { line: usize, key: String, value: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("endorsement policy: {0}")]
    Policy(#[from] PolicyError),
}

macro_rules! token_enum {
    ($name:ident { $($variant:ident => $tok:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $tok),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($tok => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{other}`", stringify!($name))),
                }
            }
        }
    };
}

token_enum!(WorkloadType {
    Uniform => "uniform",
    ReadHeavy => "read_heavy",
    InsertHeavy => "insert_heavy",
    UpdateHeavy => "update_heavy",
    RangeReadHeavy => "rangeread_heavy",
});

token_enum!(ContractVariant {
    Baseline => "baseline",
    Pruned => "pruned",
    DeltaWrite => "delta_write",
    Partitioned => "partitioned",
    AlteredDataModel => "altered_data_model",
});

token_enum!(UseCase {
    Generic => "generic",
    Scm => "scm",
    Drm => "drm",
    Ehr => "ehr",
    Dv => "dv",
    Lap => "lap",
});

/// Workload and network control variables for one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub use_case: UseCase,
    pub n_transactions: usize,
    pub send_rate: f64,
    pub workload_type: WorkloadType,
    pub key_space_size: usize,
    pub key_skew: f64,
    pub n_orgs: usize,
    /// A preset name (`P1`..`P4`) or a policy expression.
    pub endorsement_policy: String,
    pub endorser_skew: f64,
    pub tx_dist_skew: f64,
    pub block_count: u64,
    pub block_timeout_s: f64,
    pub endorse_latency_ms: f64,
    pub order_latency_ms: f64,
    pub validate_latency_ms: f64,
    /// Fixed committer cost per block on top of per-transaction validation.
    pub block_overhead_ms: f64,
    /// Client-side time to prepare and sign one proposal.
    pub client_service_ms: f64,
    pub clients_per_org: usize,
    /// Client-count multipliers per organization.
    pub client_boost: BTreeMap<String, usize>,
    /// Probability that a client submits with one endorsement too few.
    pub endorsement_fault_rate: f64,
    pub contract_variant: ContractVariant,
    /// Activities scheduled after every other activity.
    pub defer_activities: Vec<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            use_case: UseCase::Generic,
            n_transactions: 2000,
            send_rate: 300.0,
            workload_type: WorkloadType::Uniform,
            key_space_size: 1000,
            key_skew: 1.0,
            n_orgs: 2,
            endorsement_policy: "P3".into(),
            endorser_skew: 0.0,
            tx_dist_skew: 0.0,
            block_count: 300,
            block_timeout_s: 1.0,
            endorse_latency_ms: 50.0,
            order_latency_ms: 100.0,
            validate_latency_ms: 1.0,
            block_overhead_ms: 200.0,
            client_service_ms: 2.0,
            clients_per_org: 1,
            client_boost: BTreeMap::new(),
            endorsement_fault_rate: 0.0,
            contract_variant: ContractVariant::Baseline,
            defer_activities: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn orgs(&self) -> Vec<String> {
        (1..=self.n_orgs).map(|i| format!("Org{i}")).collect()
    }

    pub fn clients_of(&self, org: &str) -> usize {
        self.clients_per_org.max(1) * self.client_boost.get(org).copied().unwrap_or(1).max(1)
    }

    pub fn policy(&self) -> Result<EndorsementPolicy, ConfigError> {
        match EndorsementPolicy::preset(&self.endorsement_policy, self.n_orgs) {
            Some(p) => Ok(p),
            None => Ok(self.endorsement_policy.parse()?),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.send_rate > 0.0) {
            return bad("send_rate must be positive");
        }
        if self.block_count < 1 {
            return bad("block_count must be at least 1");
        }
        if !(self.block_timeout_s > 0.0) {
            return bad("block_timeout_s must be positive");
        }
        if self.key_space_size < 1 {
            return bad("key_space_size must be at least 1");
        }
        if self.n_orgs < 1 {
            return bad("n_orgs must be at least 1");
        }
        if !(self.key_skew >= 0.0 && self.endorser_skew >= 0.0) {
            return bad("skews must be non-negative");
        }
        if !(0.0..1.0).contains(&self.tx_dist_skew) {
            return bad("tx_dist_skew must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.endorsement_fault_rate) {
            return bad("endorsement_fault_rate must be in [0, 1]");
        }
        let latencies = [
            self.endorse_latency_ms,
            self.order_latency_ms,
            self.validate_latency_ms,
            self.block_overhead_ms,
            self.client_service_ms,
        ];
        if latencies.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("latencies must be finite and non-negative");
        }
        let policy = self.policy()?;
        let orgs = self.orgs();
        if let Some(o) = policy.orgs().into_iter().find(|o| !orgs.contains(o)) {
            return Err(ConfigError::Invalid(format!("policy names {o}, which is not one of the {} orgs", orgs.len())));
        }
        if !policy.evaluate(&orgs.iter().cloned().collect()) {
            return bad("the policy cannot be satisfied by the configured orgs");
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. A `preset` line resets to that preset first.
    pub fn apply_text(mut self, text: &str) -> Result<SimConfig, ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim().trim_matches('"'));
            self.set(line, key, value)?;
        }
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<SimConfig, ConfigError> {
        let cfg = SimConfig::default().apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
            v.parse().map_err(|_| bad())
        }
        match key {
            "preset" => {
                let seed = self.seed;
                *self = super::scenarios::preset(value).ok_or_else(|| ConfigError::UnknownPreset(value.into()))?;
                self.seed = seed;
            }
            "seed" => self.seed = num(value, bad)?,
            "use_case" => self.use_case = value.parse().map_err(|_| bad())?,
            "n_transactions" => self.n_transactions = num(value, bad)?,
            "send_rate" => self.send_rate = num(value, bad)?,
            "workload_type" => self.workload_type = value.parse().map_err(|_| bad())?,
            "key_space_size" => self.key_space_size = num(value, bad)?,
            "key_skew" => self.key_skew = num(value, bad)?,
            "n_orgs" => self.n_orgs = num(value, bad)?,
            "endorsement_policy" => self.endorsement_policy = value.to_string(),
            "endorser_skew" => self.endorser_skew = num(value, bad)?,
            "tx_dist_skew" => self.tx_dist_skew = num(value, bad)?,
            "block_count" => self.block_count = num(value, bad)?,
            "block_timeout_s" | "block_timeout" => self.block_timeout_s = num(value, bad)?,
            "endorse_latency_ms" => self.endorse_latency_ms = num(value, bad)?,
            "order_latency_ms" => self.order_latency_ms = num(value, bad)?,
            "validate_latency_ms" => self.validate_latency_ms = num(value, bad)?,
            "block_overhead_ms" => self.block_overhead_ms = num(value, bad)?,
            "client_service_ms" => self.client_service_ms = num(value, bad)?,
            "clients_per_org" => self.clients_per_org = num(value, bad)?,
            "client_boost" => {
                self.client_boost.clear();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (org, factor) = item.split_once(':').ok_or_else(bad)?;
                    self.client_boost.insert(org.trim().to_string(), num(factor.trim(), bad)?);
                }
            }
            "endorsement_fault_rate" => self.endorsement_fault_rate = num(value, bad)?,
            "contract_variant" => self.contract_variant = value.parse().map_err(|_| bad())?,
            "defer_activities" => {
                self.defer_activities = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Renders every setting as `key=value` lines that [`SimConfig::parse`] reads back.
    pub fn to_config_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "seed={}", self.seed);
        let _ = writeln!(o, "use_case={}", self.use_case);
        let _ = writeln!(o, "n_transactions={}", self.n_transactions);
        let _ = writeln!(o, "send_rate={}", self.send_rate);
        let _ = writeln!(o, "workload_type={}", self.workload_type);
        let _ = writeln!(o, "key_space_size={}", self.key_space_size);
        let _ = writeln!(o, "key_skew={}", self.key_skew);
        let _ = writeln!(o, "n_orgs={}", self.n_orgs);
        let _ = writeln!(o, "endorsement_policy={}", self.endorsement_policy);
        let _ = writeln!(o, "endorser_skew={}", self.endorser_skew);
        let _ = writeln!(o, "tx_dist_skew={}", self.tx_dist_skew);
        let _ = writeln!(o, "block_count={}", self.block_count);
        let _ = writeln!(o, "block_timeout_s={}", self.block_timeout_s);
        let _ = writeln!(o, "endorse_latency_ms={}", self.endorse_latency_ms);
        let _ = writeln!(o, "order_latency_ms={}", self.order_latency_ms);
        let _ = writeln!(o, "validate_latency_ms={}", self.validate_latency_ms);
        let _ = writeln!(o, "block_overhead_ms={}", self.block_overhead_ms);
        let _ = writeln!(o, "client_service_ms={}", self.client_service_ms);
        let _ = writeln!(o, "clients_per_org={}", self.clients_per_org);
        let boost: Vec<String> = self.client_boost.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = writeln!(o, "client_boost={}", boost.join(","));
        let _ = writeln!(o, "endorsement_fault_rate={}", self.endorsement_fault_rate);
        let _ = writeln!(o, "contract_variant={}", self.contract_variant);
        let _ = writeln!(o, "defer_activities={}", self.defer_activities.join(","));
        o
    }
}
