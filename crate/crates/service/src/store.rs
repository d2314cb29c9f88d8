//! Materialized views folded from the event log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use remitwatch_core::analytics::{EntityKind, MetadataAnnotation, Target};
use remitwatch_core::digest::sha256_hex;
use remitwatch_core::mlcore::ModelArtifact;
use remitwatch_core::riskengine::{transition_alert, Alert, HistoryIndex, RiskScore, RuleEngine, Ruleset};
use remitwatch_core::TxRecord;
use serde::Serialize;
use thiserror::Error;

use crate::event::{Event, EventPayload, RuleChange};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApplyError {
    #[error("event {seq}: expected sequence {expected}")]
    OutOfOrder { seq: u64, expected: u64 },
    #[error("event {seq}: {reason}")]
    Inconsistent { seq: u64, reason: String },
}

/// Ledger, customers, alerts, rules, models and annotations as of `seq`.
/// Also keeps the scoring history and rule-engine state so ingestion can
/// continue after a replay exactly as if it had never stopped.
#[derive(Debug, Clone, Default)]
pub struct Store {
    seq: u64,
    records: Vec<TxRecord>,
    by_hash: HashMap<String, usize>,
    customers: BTreeSet<String>,
    scores: BTreeMap<String, RiskScore>,
    alerts: BTreeMap<String, Alert>,
    alert_order: Vec<String>,
    engine: RuleEngine,
    history: HistoryIndex,
    models: BTreeMap<String, ModelArtifact>,
    active_model: Option<String>,
    annotations: Vec<MetadataAnnotation>,
}

#[derive(Serialize)]
struct View<'a> {
    seq: u64,
    records: &'a [TxRecord],
    scores: &'a BTreeMap<String, RiskScore>,
    alerts: Vec<&'a Alert>,
    rules: &'a Ruleset,
    models: &'a BTreeMap<String, ModelArtifact>,
    active_model: &'a Option<String>,
    annotations: &'a [MetadataAnnotation],
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds events 1..n into an empty store.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Store, ApplyError> {
        let mut s = Store::new();
        for ev in events {
            s.apply(ev)?;
        }
        Ok(s)
    }

    pub fn apply(&mut self, ev: &Event) -> Result<(), ApplyError> {
        let seq = ev.seq;
        if seq != self.seq + 1 {
            return Err(ApplyError::OutOfOrder {
                seq,
                expected: self.seq + 1,
            });
        }
        let bad = |reason: String| ApplyError::Inconsistent { seq, reason };
        match &ev.payload {
            EventPayload::TxMined(r) => {
                if self.by_hash.contains_key(&r.tx_hash) {
                    return Err(bad(format!("duplicate transaction {}", r.tx_hash)));
                }
                self.by_hash.insert(r.tx_hash.clone(), self.records.len());
                self.customers.insert(r.sender_id.clone());
                self.customers.insert(r.receiver_id.clone());
                self.history.insert((**r).clone());
                self.engine.observe(r);
                self.records.push((**r).clone());
            }
            EventPayload::TxScored(s) => {
                if !self.by_hash.contains_key(&s.tx_hash) {
                    return Err(bad(format!("score for unknown transaction {}", s.tx_hash)));
                }
                self.scores.insert(s.tx_hash.clone(), s.clone());
            }
            EventPayload::AlertFired(a) => {
                if self.alerts.contains_key(&a.alert_id) {
                    return Err(bad(format!("duplicate alert {}", a.alert_id)));
                }
                self.engine.record_alert(a);
                self.alert_order.push(a.alert_id.clone());
                self.alerts.insert(a.alert_id.clone(), (**a).clone());
            }
            EventPayload::AlertTransitioned(t) => {
                let alert = self
                    .alerts
                    .get(&t.alert_id)
                    .ok_or_else(|| bad(format!("unknown alert {}", t.alert_id)))?;
                if alert.state != t.from {
                    return Err(bad(format!("alert {} is {}, not {}", t.alert_id, alert.state, t.from)));
                }
                let next = transition_alert(alert, t.to, &t.note, t.at).map_err(|e| bad(e.to_string()))?;
                self.alerts.insert(t.alert_id.clone(), next);
            }
            EventPayload::RuleChanged(change) => {
                let mut rules = self.engine.ruleset().clone();
                match change {
                    RuleChange::Upsert(rule) => match rules.rules.iter_mut().find(|r| r.rule_id == rule.rule_id) {
                        Some(slot) => *slot = rule.clone(),
                        None => rules.rules.push(rule.clone()),
                    },
                    RuleChange::Delete(id) => rules.rules.retain(|r| &r.rule_id != id),
                }
                rules.validate().map_err(|e| bad(e.to_string()))?;
                self.engine.set_ruleset(rules);
            }
            EventPayload::ModelRegistered(m) => {
                match &m.artifact {
                    Some(a) => {
                        self.models.insert(m.model_id.clone(), (**a).clone());
                    }
                    None if !self.models.contains_key(&m.model_id) => {
                        return Err(bad(format!("unknown model {}", m.model_id)));
                    }
                    None => {}
                }
                if m.active {
                    self.active_model = Some(m.model_id.clone());
                }
            }
            EventPayload::AnnotationAdded(a) => {
                if !self.target_exists(&a.target) {
                    return Err(bad(format!(
                        "annotation target {} {} missing",
                        a.target.kind, a.target.id
                    )));
                }
                self.annotations.push(a.clone());
            }
        }
        self.seq = seq;
        Ok(())
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn records(&self) -> &[TxRecord] {
        &self.records
    }

    pub fn record(&self, tx_hash: &str) -> Option<&TxRecord> {
        self.by_hash.get(tx_hash).map(|i| &self.records[*i])
    }

    pub fn has_customer(&self, customer_id: &str) -> bool {
        self.customers.contains(customer_id)
    }

    pub fn scores(&self) -> &BTreeMap<String, RiskScore> {
        &self.scores
    }

    /// Alerts in firing order.
    pub fn alerts(&self) -> impl Iterator<Item = &Alert> + '_ {
        self.alert_order.iter().map(|id| &self.alerts[id])
    }

    pub fn alert(&self, alert_id: &str) -> Option<&Alert> {
        self.alerts.get(alert_id)
    }

    pub fn alerts_for(&self, tx_hash: &str) -> Vec<&Alert> {
        self.alerts()
            .filter(|a| a.tx_hashes.last().is_some_and(|h| h == tx_hash))
            .collect()
    }

    pub fn ruleset(&self) -> &Ruleset {
        self.engine.ruleset()
    }

    pub fn engine(&self) -> &RuleEngine {
        &self.engine
    }

    pub fn history(&self) -> &HistoryIndex {
        &self.history
    }

    pub fn models(&self) -> &BTreeMap<String, ModelArtifact> {
        &self.models
    }

    pub fn active_model(&self) -> Option<(&str, &ModelArtifact)> {
        let id = self.active_model.as_deref()?;
        Some((id, self.models.get(id)?))
    }

    pub fn annotations(&self) -> &[MetadataAnnotation] {
        &self.annotations
    }

    pub fn target_exists(&self, t: &Target) -> bool {
        match t.kind {
            EntityKind::Transaction => self.by_hash.contains_key(&t.id),
            EntityKind::Customer => self.customers.contains(&t.id),
            EntityKind::Alert => self.alerts.contains_key(&t.id),
            EntityKind::Model => self.models.contains_key(&t.id),
            EntityKind::Rule => self.ruleset().get(&t.id).is_some(),
        }
    }

    /// Digest of every view; equal stores give equal digests on any platform.
    pub fn snapshot_hash(&self) -> String {
        let view = View {
            seq: self.seq,
            records: &self.records,
            scores: &self.scores,
            alerts: self.alerts().collect(),
            rules: self.engine.ruleset(),
            models: &self.models,
            active_model: &self.active_model,
            annotations: &self.annotations,
        };
        sha256_hex(serde_json::to_vec(&view).expect("views serialize"))
    }
}
