use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tunable detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// High-traffic rate, in TPS.
    #[serde(rename = "Rt1")]
    pub rate: f64,
    /// Failure fraction of an interval's traffic.
    #[serde(rename = "Rt2")]
    pub failure_fraction: f64,
    /// Allowed relative deviation of the average block size from the rate.
    #[serde(rename = "Bt")]
    pub block_deviation: f64,
    #[serde(rename = "Et")]
    pub endorser_fraction: f64,
    #[serde(rename = "It")]
    pub invoker_fraction: f64,
    /// Share of MVCC failures that must come from reorderable pairs.
    #[serde(rename = "At")]
    pub reorder_fraction: f64,
    #[serde(rename = "Hk_frac")]
    pub hotkey_fraction: f64,
    #[serde(rename = "Hk_min")]
    pub hotkey_min: u64,
    /// Interval size in seconds.
    pub ins: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            rate: 300.0,
            failure_fraction: 0.3,
            block_deviation: 0.6,
            endorser_fraction: 0.5,
            invoker_fraction: 0.5,
            reorder_fraction: 0.4,
            hotkey_fraction: 0.1,
            hotkey_min: 5,
            ins: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown threshold `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {value}")]
    BadValue { line: usize, key: String, value: String },
    #[error("threshold `{0}` out of range")]
    OutOfRange(&'static str),
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        let fractions = [
            ("Rt2", self.failure_fraction),
            ("Bt", self.block_deviation),
            ("Et", self.endorser_fraction),
            ("It", self.invoker_fraction),
            ("At", self.reorder_fraction),
            ("Hk_frac", self.hotkey_fraction),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ThresholdError::OutOfRange(name));
            }
        }
        if !(self.rate > 0.0) {
            return Err(ThresholdError::OutOfRange("Rt1"));
        }
        if !(self.ins > 0.0) {
            return Err(ThresholdError::OutOfRange("ins"));
        }
        if self.hotkey_min < 1 {
            return Err(ThresholdError::OutOfRange("Hk_min"));
        }
        Ok(())
    }

    /// Parses a flat `key=value` file; unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Thresholds, ThresholdError> {
        let mut t = Thresholds::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ThresholdError::Syntax { line: line_no })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let bad = || ThresholdError::BadValue {
                line: line_no,
                key: key.to_string(),
                value: value.to_string(),
            };
            if key == "Hk_min" {
                t.hotkey_min = value.parse().map_err(|_| bad())?;
                continue;
            }
            let v: f64 = value.parse().map_err(|_| bad())?;
            match key {
                "Rt1" => t.rate = v,
                "Rt2" => t.failure_fraction = v,
                "Bt" => t.block_deviation = v,
                "Et" => t.endorser_fraction = v,
                "It" => t.invoker_fraction = v,
                "At" => t.reorder_fraction = v,
                "Hk_frac" => t.hotkey_fraction = v,
                "ins" => t.ins = v,
                _ => {
                    return Err(ThresholdError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            }
        }
        t.validate()?;
        Ok(t)
    }

    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Rt1={}", self.rate);
        let _ = writeln!(out, "Rt2={}", self.failure_fraction);
        let _ = writeln!(out, "Bt={}", self.block_deviation);
        let _ = writeln!(out, "Et={}", self.endorser_fraction);
        let _ = writeln!(out, "It={}", self.invoker_fraction);
        let _ = writeln!(out, "At={}", self.reorder_fraction);
        let _ = writeln!(out, "Hk_frac={}", self.hotkey_fraction);
        let _ = writeln!(out, "Hk_min={}", self.hotkey_min);
        let _ = writeln!(out, "ins={}", self.ins);
        out
    }
}
