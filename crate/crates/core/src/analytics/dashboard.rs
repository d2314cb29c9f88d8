use std::collections::BTreeMap;

use chrono::Timelike;
use serde::{Deserialize, Serialize};

use super::ScoreLookup;
use crate::mlcore::MetricsReport;
use crate::record::TxRecord;
use crate::riskengine::{Alert, RiskTier};

pub const TOP_CORRIDORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorridorVolume {
    pub source: String,
    pub destination: String,
    pub count: u64,
    pub amount_minor: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub model_id: String,
    pub model_type: String,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardPayload {
    pub total_tx: u64,
    /// Transactions per UTC hour of day.
    pub hourly_volume: [u64; 24],
    /// Keys `low`, `medium`, `high`, always present.
    pub alerts_by_severity: BTreeMap<String, u64>,
    /// Scored transactions per tier; keys always present.
    pub tier_distribution: BTreeMap<String, u64>,
    /// By count descending, then amount descending, then corridor name.
    pub top_corridors: Vec<CorridorVolume>,
    pub model: Option<ModelCard>,
}

fn tier_map() -> BTreeMap<String, u64> {
    [RiskTier::Low, RiskTier::Medium, RiskTier::High]
        .into_iter()
        .map(|t| (t.to_string(), 0))
        .collect()
}

pub fn dashboard_snapshot(
    records: &[TxRecord],
    scores: &dyn ScoreLookup,
    alerts: &[Alert],
    model: Option<ModelCard>,
) -> DashboardPayload {
    let mut hourly_volume = [0u64; 24];
    let mut tiers = tier_map();
    let mut corridors: BTreeMap<(&str, &str), (u64, u128)> = BTreeMap::new();
    for r in records {
        hourly_volume[r.timestamp.hour() as usize] += 1;
        if let Some(s) = scores.score_of(&r.tx_hash) {
            *tiers.get_mut(s.tier.as_str()).expect("all tiers present") += 1;
        }
        let c = corridors.entry(r.corridor()).or_default();
        c.0 += 1;
        c.1 += u128::from(r.amount_minor);
    }
    let mut alerts_by_severity = tier_map();
    for a in alerts {
        *alerts_by_severity
            .get_mut(a.severity.as_str())
            .expect("all tiers present") += 1;
    }
    let mut top: Vec<CorridorVolume> = corridors
        .into_iter()
        .map(|((s, d), (count, amount_minor))| CorridorVolume {
            source: s.to_string(),
            destination: d.to_string(),
            count,
            amount_minor,
        })
        .collect();
    top.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(b.amount_minor.cmp(&a.amount_minor))
            .then_with(|| (&a.source, &a.destination).cmp(&(&b.source, &b.destination)))
    });
    top.truncate(TOP_CORRIDORS);
    DashboardPayload {
        total_tx: records.len() as u64,
        hourly_volume,
        alerts_by_severity,
        tier_distribution: tiers,
        top_corridors: top,
        model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::NoScores;

    #[test]
    fn empty_store_has_full_shape() {
        let d = dashboard_snapshot(&[], &NoScores, &[], None);
        assert_eq!(d.total_tx, 0);
        assert_eq!(d.hourly_volume, [0; 24]);
        assert_eq!(d.alerts_by_severity.len(), 3);
        assert!(d.alerts_by_severity.values().all(|v| *v == 0));
        assert_eq!(d.tier_distribution.len(), 3);
        assert!(d.top_corridors.is_empty());
        assert!(d.model.is_none());
    }
}
