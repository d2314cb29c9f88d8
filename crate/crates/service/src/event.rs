use std::fmt;

use chrono::{DateTime, Utc};
use remitwatch_core::analytics::MetadataAnnotation;
use remitwatch_core::mlcore::ModelArtifact;
use remitwatch_core::record::iso_seconds;
use remitwatch_core::riskengine::{Alert, AlertRule, AlertState, RiskScore};
use remitwatch_core::TxRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TxMined,
    TxScored,
    AlertFired,
    AlertTransitioned,
    RuleChanged,
    ModelRegistered,
    AnnotationAdded,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::TxMined,
        EventKind::TxScored,
        EventKind::AlertFired,
        EventKind::AlertTransitioned,
        EventKind::RuleChanged,
        EventKind::ModelRegistered,
        EventKind::AnnotationAdded,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::TxMined => "tx_mined",
            EventKind::TxScored => "tx_scored",
            EventKind::AlertFired => "alert_fired",
            EventKind::AlertTransitioned => "alert_transitioned",
            EventKind::RuleChanged => "rule_changed",
            EventKind::ModelRegistered => "model_registered",
            EventKind::AnnotationAdded => "annotation_added",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub alert_id: String,
    pub from: AlertState,
    pub to: AlertState,
    pub note: String,
    #[serde(with = "iso_seconds")]
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleChange {
    Upsert(AlertRule),
    Delete(String),
}

/// Registration carries the artifact; a later activation of the same model
/// repeats the id with `artifact` absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRegistration {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<Box<ModelArtifact>>,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    TxMined(Box<TxRecord>),
    TxScored(RiskScore),
    AlertFired(Box<Alert>),
    AlertTransitioned(Transition),
    RuleChanged(RuleChange),
    ModelRegistered(ModelRegistration),
    AnnotationAdded(MetadataAnnotation),
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::TxMined(_) => EventKind::TxMined,
            EventPayload::TxScored(_) => EventKind::TxScored,
            EventPayload::AlertFired(_) => EventKind::AlertFired,
            EventPayload::AlertTransitioned(_) => EventKind::AlertTransitioned,
            EventPayload::RuleChanged(_) => EventKind::RuleChanged,
            EventPayload::ModelRegistered(_) => EventKind::ModelRegistered,
            EventPayload::AnnotationAdded(_) => EventKind::AnnotationAdded,
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(with = "iso_seconds")]
    pub recorded_at: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}
