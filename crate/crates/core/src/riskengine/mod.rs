//! Real-time scoring, risk tiers and declarative alert rules.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlcore::{AnomalyStats, MlError, ModelArtifact};
use crate::pipeline::features::{extract_features, schema_hash, FeatureError};
use crate::record::TxRecord;

pub mod alert;
pub mod rules;

pub use alert::{transition_alert, Alert, AlertState, AuditEntry};
pub use rules::{
    default_ruleset, evaluate_rules, Action, AlertRule, DedupIndex, RuleEngine, RuleParams, Ruleset, WindowTx,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskTier {
    Low,
    Medium,
    High,
}

impl RiskTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskTier::Low => "low",
            RiskTier::Medium => "medium",
            RiskTier::High => "high",
        }
    }
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierThresholds {
    pub t_med: f64,
    pub t_high: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        Self {
            t_med: 0.5,
            t_high: 0.9,
        }
    }
}

impl TierThresholds {
    pub fn new(t_med: f64, t_high: f64) -> Result<Self, RiskError> {
        let t = Self { t_med, t_high };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(0.0 <= self.t_med && self.t_med < self.t_high && self.t_high <= 1.0) {
            return Err(RiskError::InvalidThresholds {
                t_med: self.t_med,
                t_high: self.t_high,
            });
        }
        Ok(())
    }

    /// Boundaries are inclusive upwards: exactly `t_high` is high.
    pub fn tier(&self, probability: f64) -> RiskTier {
        if probability >= self.t_high {
            RiskTier::High
        } else if probability >= self.t_med {
            RiskTier::Medium
        } else {
            RiskTier::Low
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("model feature schema {found} does not match pipeline schema {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("model type {0} does not produce probabilities")]
    NotAClassifier(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("thresholds must satisfy 0 <= t_med < t_high <= 1 (got {t_med}, {t_high})")]
    InvalidThresholds { t_med: f64, t_high: f64 },
    #[error("invalid rule `{rule_id}`: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("illegal alert transition {from} -> {to}")]
    IllegalTransition { from: AlertState, to: AlertState },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub tx_hash: String,
    pub model_id: String,
    pub probability: f64,
    pub anomaly_score: f64,
    pub tier: RiskTier,
}

/// Scores one transaction given the sender's strictly earlier transactions
/// (oldest first). Anomaly stats default to the ones stored in the artifact.
pub fn score_transaction(
    record: &TxRecord,
    history: &[&TxRecord],
    model_id: &str,
    artifact: &ModelArtifact,
    anomaly: Option<&AnomalyStats>,
    thresholds: &TierThresholds,
) -> Result<RiskScore, RiskError> {
    if artifact.feature_schema_hash != schema_hash() {
        return Err(RiskError::SchemaMismatch {
            expected: schema_hash().to_string(),
            found: artifact.feature_schema_hash.clone(),
        });
    }
    let classifier = artifact
        .classifier()
        .ok_or_else(|| RiskError::NotAClassifier(artifact.model_type().to_string()))?;
    let corridors = artifact.preprocessing.corridors.clone().unwrap_or_default();
    let features = extract_features(record, history, &corridors)?.vector;
    let probability = classifier.predict_proba(&artifact.preprocessing.model_input(&features))?;
    let anomaly_score = match anomaly.or(artifact.preprocessing.anomaly.as_ref()) {
        Some(stats) => stats.score(&features.0)?,
        None => 0.0,
    };
    Ok(RiskScore {
        tx_hash: record.tx_hash.clone(),
        model_id: model_id.to_string(),
        probability,
        anomaly_score,
        tier: thresholds.tier(probability),
    })
}

/// Every transaction seen so far, per sender, ordered by (timestamp, hash).
#[derive(Debug, Clone, Default)]
pub struct HistoryIndex {
    by_sender: HashMap<String, Vec<TxRecord>>,
    len: usize,
}

impl HistoryIndex {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The sender's transactions strictly before `ts`.
    pub fn before(&self, sender_id: &str, ts: i64) -> Vec<&TxRecord> {
        match self.by_sender.get(sender_id) {
            None => Vec::new(),
            Some(h) => {
                let cut = h.partition_point(|r| r.epoch_seconds() < ts);
                h[..cut].iter().collect()
            }
        }
    }

    pub fn insert(&mut self, record: TxRecord) {
        let h = self.by_sender.entry(record.sender_id.clone()).or_default();
        let key = (record.epoch_seconds(), record.tx_hash.clone());
        let at = h.partition_point(|r| (r.epoch_seconds(), r.tx_hash.as_str()) < (key.0, key.1.as_str()));
        h.insert(at, record);
        self.len += 1;
    }
}
