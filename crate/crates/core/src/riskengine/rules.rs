//! Declarative alert rules.
//!
//! Rules see the triggering record and the sender's window: every earlier
//! record of the same sender inside the rule's `window_seconds`, ending at
//! the trigger (inclusive). Windowed rules deduplicate per
//! (rule, customer): after an alert at time t0 the pair stays quiet while
//! `ts < t0 + window_seconds`. Rules without a window alert on every match.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::alert::{Alert, AlertState};
use super::{RiskError, RiskScore, RiskTier};
use crate::digest::sha256_hex;
use crate::record::TxRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RuleParams {
    AmountThreshold {
        min_amount_minor: u64,
    },
    Velocity {
        max_tx: usize,
        window_seconds: i64,
    },
    Structuring {
        threshold_minor: u64,
        margin: f64,
        min_count: usize,
        window_seconds: i64,
    },
    ScoreThreshold {
        min_score: f64,
    },
    Anomaly {
        min_anomaly_score: f64,
    },
}

impl RuleParams {
    pub fn kind(&self) -> &'static str {
        match self {
            RuleParams::AmountThreshold { .. } => "amount_threshold",
            RuleParams::Velocity { .. } => "velocity",
            RuleParams::Structuring { .. } => "structuring",
            RuleParams::ScoreThreshold { .. } => "score_threshold",
            RuleParams::Anomaly { .. } => "anomaly",
        }
    }

    pub fn window_seconds(&self) -> Option<i64> {
        match self {
            RuleParams::Velocity { window_seconds, .. } | RuleParams::Structuring { window_seconds, .. } => {
                Some(*window_seconds)
            }
            _ => None,
        }
    }

    /// Lowest severity an alert of this kind carries.
    fn base_severity(&self) -> RiskTier {
        match self {
            RuleParams::Structuring { .. } => RiskTier::High,
            RuleParams::ScoreThreshold { .. } => RiskTier::Low,
            _ => RiskTier::Medium,
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            RuleParams::AmountThreshold { min_amount_minor } if *min_amount_minor == 0 => {
                Err("min_amount_minor must be > 0".into())
            }
            RuleParams::Velocity { window_seconds, .. } if *window_seconds <= 0 => {
                Err("window_seconds must be > 0".into())
            }
            RuleParams::Structuring {
                threshold_minor,
                margin,
                min_count,
                window_seconds,
            } => {
                if *threshold_minor == 0 {
                    Err("threshold_minor must be > 0".into())
                } else if !(*margin > 0.0 && *margin < 1.0) {
                    Err("margin must be in (0, 1)".into())
                } else if *min_count == 0 {
                    Err("min_count must be >= 1".into())
                } else if *window_seconds <= 0 {
                    Err("window_seconds must be > 0".into())
                } else {
                    Ok(())
                }
            }
            RuleParams::ScoreThreshold { min_score } if !(0.0..=1.0).contains(min_score) => {
                Err("min_score must be in [0, 1]".into())
            }
            RuleParams::Anomaly { min_anomaly_score } if !(*min_anomaly_score >= 0.0) => {
                Err("min_anomaly_score must be >= 0".into())
            }
            _ => Ok(()),
        }
    }
}

/// Structuring band `[(1 − margin)·threshold, threshold)` in minor units.
pub fn in_structuring_band(amount_minor: u64, threshold_minor: u64, margin: f64) -> bool {
    (amount_minor as f64) >= (1.0 - margin) * threshold_minor as f64 && amount_minor < threshold_minor
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    NotifyStream,
    MarkReview,
    /// Records the intent only; nothing is sent.
    Email,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRule {
    pub rule_id: String,
    pub name: String,
    #[serde(flatten)]
    pub params: RuleParams,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
    #[serde(default)]
    pub actions: Vec<Action>,
}

fn enabled_default() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ruleset {
    pub rules: Vec<AlertRule>,
}

impl Ruleset {
    pub fn new(rules: Vec<AlertRule>) -> Result<Self, RiskError> {
        let r = Ruleset { rules };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        let mut seen = BTreeSet::new();
        for rule in &self.rules {
            let bad = |reason: String| RiskError::InvalidRule {
                rule_id: rule.rule_id.clone(),
                reason,
            };
            if rule.rule_id.trim().is_empty() {
                return Err(bad("rule_id must be non-empty".into()));
            }
            if !seen.insert(rule.rule_id.as_str()) {
                return Err(bad("duplicate rule_id".into()));
            }
            rule.params.validate().map_err(bad)?;
        }
        Ok(())
    }

    pub fn get(&self, rule_id: &str) -> Option<&AlertRule> {
        self.rules.iter().find(|r| r.rule_id == rule_id)
    }

    /// Longest window any enabled rule looks back over.
    pub fn max_window(&self) -> i64 {
        self.rules
            .iter()
            .filter(|r| r.enabled)
            .filter_map(|r| r.params.window_seconds())
            .max()
            .unwrap_or(0)
    }
}

/// Starter ruleset for a scenario reporting threshold.
pub fn default_ruleset(report_threshold_minor: u64) -> Ruleset {
    let notify = vec![Action::NotifyStream];
    let rule = |id: &str, name: &str, params, actions: &Vec<Action>| AlertRule {
        rule_id: id.into(),
        name: name.into(),
        params,
        enabled: true,
        actions: actions.clone(),
    };
    Ruleset {
        rules: vec![
            rule(
                "large-amount",
                "Amount at or above the reporting threshold",
                RuleParams::AmountThreshold {
                    min_amount_minor: report_threshold_minor,
                },
                &notify,
            ),
            rule(
                "velocity-1h",
                "More than 10 transfers within an hour",
                RuleParams::Velocity {
                    max_tx: 10,
                    window_seconds: 3600,
                },
                &notify,
            ),
            rule(
                "structuring-24h",
                "Repeated transfers just under the reporting threshold",
                RuleParams::Structuring {
                    threshold_minor: report_threshold_minor,
                    margin: 0.3,
                    min_count: 5,
                    window_seconds: 86_400,
                },
                &vec![Action::NotifyStream, Action::MarkReview],
            ),
            rule(
                "model-high",
                "Model probability at or above 0.9",
                RuleParams::ScoreThreshold { min_score: 0.9 },
                &notify,
            ),
            rule(
                "anomaly",
                "Robust z-score of 10 or more on any feature",
                RuleParams::Anomaly {
                    min_anomaly_score: 10.0,
                },
                &notify,
            ),
        ],
    }
}

/// What rules need to know about a past transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTx {
    pub tx_hash: String,
    pub timestamp: i64,
    pub amount_minor: u64,
}

impl From<&TxRecord> for WindowTx {
    fn from(r: &TxRecord) -> Self {
        WindowTx {
            tx_hash: r.tx_hash.clone(),
            timestamp: r.epoch_seconds(),
            amount_minor: r.amount_minor,
        }
    }
}

/// Time of the last alert per (rule_id, customer_id).
pub type DedupIndex = BTreeMap<(String, String), i64>;

pub fn alert_id(rule_id: &str, tx_hash: &str) -> String {
    format!("A-{}", &sha256_hex(format!("{rule_id}|{tx_hash}").as_bytes())[..16])
}

/// Evaluates every enabled rule against one scored record. `window` holds
/// the sender's earlier transactions in arrival order; it may extend past
/// any rule's window, which is trimmed here.
pub fn evaluate_rules(
    score: &RiskScore,
    record: &TxRecord,
    window: &[WindowTx],
    ruleset: &Ruleset,
    dedup: &DedupIndex,
) -> Vec<Alert> {
    let ts = record.epoch_seconds();
    let mut out = Vec::new();
    for rule in ruleset.rules.iter().filter(|r| r.enabled) {
        let recent = |w: i64| window.iter().filter(move |t| t.timestamp > ts - w && t.timestamp <= ts);
        let hashes: Option<Vec<String>> = match &rule.params {
            RuleParams::AmountThreshold { min_amount_minor } => {
                (record.amount_minor >= *min_amount_minor).then(Vec::new)
            }
            RuleParams::Velocity { max_tx, window_seconds } => {
                let hits: Vec<String> = recent(*window_seconds).map(|t| t.tx_hash.clone()).collect();
                (hits.len() + 1 > *max_tx).then_some(hits)
            }
            RuleParams::Structuring {
                threshold_minor,
                margin,
                min_count,
                window_seconds,
            } => {
                if in_structuring_band(record.amount_minor, *threshold_minor, *margin) {
                    let hits: Vec<String> = recent(*window_seconds)
                        .filter(|t| in_structuring_band(t.amount_minor, *threshold_minor, *margin))
                        .map(|t| t.tx_hash.clone())
                        .collect();
                    (hits.len() + 1 >= *min_count).then_some(hits)
                } else {
                    None
                }
            }
            RuleParams::ScoreThreshold { min_score } => (score.probability >= *min_score).then(Vec::new),
            RuleParams::Anomaly { min_anomaly_score } => (score.anomaly_score >= *min_anomaly_score).then(Vec::new),
        };
        let Some(mut hashes) = hashes else { continue };
        if let Some(w) = rule.params.window_seconds() {
            let key = (rule.rule_id.clone(), record.sender_id.clone());
            if dedup.get(&key).is_some_and(|t0| ts < t0 + w) {
                continue;
            }
        }
        hashes.push(record.tx_hash.clone());
        out.push(Alert {
            alert_id: alert_id(&rule.rule_id, &record.tx_hash),
            rule_id: rule.rule_id.clone(),
            tx_hashes: hashes,
            customer_id: record.sender_id.clone(),
            fired_at: record.timestamp,
            severity: rule.params.base_severity().max(score.tier),
            state: AlertState::Open,
            note: rule.name.clone(),
            actions: rule.actions.clone(),
            audit: Vec::new(),
        });
    }
    out
}

/// Stateful wrapper: keeps per-sender history and the dedup index.
///
/// History is never trimmed. A record may arrive arbitrarily late, and any
/// earlier transaction inside its window must still be there; the store
/// above keeps every record anyway, so this costs a constant factor.
///
/// `process` is `evaluate` followed by `observe` and `record_alert`; the
/// split lets an event log fold the same state back in during replay.
#[derive(Debug, Clone, Default)]
pub struct RuleEngine {
    ruleset: Ruleset,
    /// Per sender, keyed by (timestamp, arrival number).
    history: HashMap<String, BTreeMap<(i64, u64), WindowTx>>,
    arrivals: u64,
    dedup: DedupIndex,
}

impl RuleEngine {
    pub fn new(ruleset: Ruleset) -> Self {
        RuleEngine {
            ruleset,
            ..Default::default()
        }
    }

    pub fn ruleset(&self) -> &Ruleset {
        &self.ruleset
    }

    /// Swaps the ruleset, keeping history and dedup state.
    pub fn set_ruleset(&mut self, ruleset: Ruleset) {
        self.ruleset = ruleset;
    }

    /// Alerts `record` would fire, without changing any state.
    pub fn evaluate(&self, score: &RiskScore, record: &TxRecord) -> Vec<Alert> {
        let ts = record.epoch_seconds();
        let horizon = self.ruleset.max_window();
        let mut hits: Vec<(u64, &WindowTx)> = match self.history.get(&record.sender_id) {
            Some(h) if horizon > 0 => h
                .range((ts - horizon + 1, 0)..=(ts, u64::MAX))
                .map(|(&(_, n), t)| (n, t))
                .collect(),
            _ => Vec::new(),
        };
        hits.sort_unstable_by_key(|(n, _)| *n);
        let window: Vec<WindowTx> = hits.into_iter().map(|(_, t)| t.clone()).collect();
        evaluate_rules(score, record, &window, &self.ruleset, &self.dedup)
    }

    /// Adds `record` to its sender's history.
    pub fn observe(&mut self, record: &TxRecord) {
        self.arrivals += 1;
        self.history
            .entry(record.sender_id.clone())
            .or_default()
            .insert((record.epoch_seconds(), self.arrivals), WindowTx::from(record));
    }

    /// Starts the dedup period of a fired windowed alert.
    pub fn record_alert(&mut self, alert: &Alert) {
        if self
            .ruleset
            .get(&alert.rule_id)
            .is_some_and(|r| r.params.window_seconds().is_some())
        {
            self.dedup.insert(
                (alert.rule_id.clone(), alert.customer_id.clone()),
                alert.fired_at.timestamp(),
            );
        }
    }

    pub fn process(&mut self, score: &RiskScore, record: &TxRecord) -> Vec<Alert> {
        let alerts = self.evaluate(score, record);
        self.observe(record);
        for a in &alerts {
            self.record_alert(a);
        }
        alerts
    }
}
