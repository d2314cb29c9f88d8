//! Rule evaluation by rescanning the whole history for every transaction.

use std::collections::BTreeMap;

use remitwatch_core::riskengine::{AlertRule, RiskScore, RuleParams, Ruleset};
use remitwatch_core::TxRecord;

/// One fired alert as (rule_id, customer_id, contributing hashes with the
/// trigger last).
pub type Fired = (String, String, Vec<String>);

fn band(amount: u64, threshold: u64, margin: f64) -> bool {
    amount < threshold && amount as f64 >= (1.0 - margin) * threshold as f64
}

fn window_of(rule: &AlertRule) -> Option<i64> {
    match rule.params {
        RuleParams::Velocity { window_seconds, .. } | RuleParams::Structuring { window_seconds, .. } => {
            Some(window_seconds)
        }
        _ => None,
    }
}

/// Alerts in firing order. A rule's window holds the sender's earlier
/// arrivals timestamped in `(ts − window, ts]`. `scores` must hold a score for every record.
/// A windowed rule stays quiet for a sender while the trigger time is
/// before its previous alert time plus the window.
pub fn brute_force_alerts(records: &[TxRecord], scores: &BTreeMap<String, RiskScore>, ruleset: &Ruleset) -> Vec<Fired> {
    let mut last_alert: BTreeMap<(String, String), i64> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let ts = r.timestamp.timestamp();
        let score = &scores[&r.tx_hash];
        for rule in ruleset.rules.iter().filter(|x| x.enabled) {
            let earlier = |w: i64| -> Vec<&TxRecord> {
                records[..i]
                    .iter()
                    .filter(|e| {
                        e.sender_id == r.sender_id && e.timestamp.timestamp() > ts - w && e.timestamp.timestamp() <= ts
                    })
                    .collect()
            };
            let hits: Option<Vec<&TxRecord>> = match &rule.params {
                RuleParams::AmountThreshold { min_amount_minor } => {
                    if r.amount_minor >= *min_amount_minor {
                        Some(vec![])
                    } else {
                        None
                    }
                }
                RuleParams::Velocity { max_tx, window_seconds } => {
                    let w = earlier(*window_seconds);
                    if w.len() + 1 > *max_tx {
                        Some(w)
                    } else {
                        None
                    }
                }
                RuleParams::Structuring {
                    threshold_minor,
                    margin,
                    min_count,
                    window_seconds,
                } => {
                    if band(r.amount_minor, *threshold_minor, *margin) {
                        let w: Vec<&TxRecord> = earlier(*window_seconds)
                            .into_iter()
                            .filter(|e| band(e.amount_minor, *threshold_minor, *margin))
                            .collect();
                        if w.len() + 1 >= *min_count {
                            Some(w)
                        } else {
                            None
                        }
                    } else {
                        None
                    }
                }
                RuleParams::ScoreThreshold { min_score } => (score.probability >= *min_score).then(Vec::new),
                RuleParams::Anomaly { min_anomaly_score } => (score.anomaly_score >= *min_anomaly_score).then(Vec::new),
            };
            let Some(hits) = hits else { continue };
            let key = (rule.rule_id.clone(), r.sender_id.clone());
            if let Some(w) = window_of(rule) {
                if let Some(t0) = last_alert.get(&key) {
                    if ts < t0 + w {
                        continue;
                    }
                }
                last_alert.insert(key, ts);
            }
            let mut hashes: Vec<String> = hits.iter().map(|e| e.tx_hash.clone()).collect();
            hashes.push(r.tx_hash.clone());
            out.push((rule.rule_id.clone(), r.sender_id.clone(), hashes));
        }
    }
    out
}
