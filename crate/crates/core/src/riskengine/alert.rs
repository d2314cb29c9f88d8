use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::rules::Action;
use super::{RiskError, RiskTier};
use crate::record::iso_seconds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertState {
    Open,
    Acknowledged,
    Escalated,
    Closed,
}

impl AlertState {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlertState::Open => "open",
            AlertState::Acknowledged => "acknowledged",
            AlertState::Escalated => "escalated",
            AlertState::Closed => "closed",
        }
    }

    pub fn can_move_to(&self, to: AlertState) -> bool {
        use AlertState::*;
        matches!(
            (self, to),
            (Open, Acknowledged) | (Open, Closed) | (Acknowledged, Escalated) | (Acknowledged, Closed)
        )
    }
}

impl fmt::Display for AlertState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AlertState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Open, Self::Acknowledged, Self::Escalated, Self::Closed]
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown alert state `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub from: AlertState,
    pub to: AlertState,
    pub note: String,
    #[serde(with = "iso_seconds")]
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub rule_id: String,
    /// The triggering transaction comes last.
    pub tx_hashes: Vec<String>,
    pub customer_id: String,
    #[serde(with = "iso_seconds")]
    pub fired_at: DateTime<Utc>,
    pub severity: RiskTier,
    pub state: AlertState,
    pub note: String,
    pub actions: Vec<Action>,
    #[serde(default)]
    pub audit: Vec<AuditEntry>,
}

impl Alert {
    pub fn trigger_hash(&self) -> &str {
        self.tx_hashes.last().map(String::as_str).unwrap_or_default()
    }
}

pub fn transition_alert(alert: &Alert, to: AlertState, note: &str, at: DateTime<Utc>) -> Result<Alert, RiskError> {
    if !alert.state.can_move_to(to) {
        return Err(RiskError::IllegalTransition { from: alert.state, to });
    }
    let mut next = alert.clone();
    next.audit.push(AuditEntry {
        from: alert.state,
        to,
        note: note.to_string(),
        at,
    });
    next.state = to;
    if !note.is_empty() {
        next.note = note.to_string();
    }
    Ok(next)
}
