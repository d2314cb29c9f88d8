//! Fixed 11-feature schema describing a transaction in its sender's
//! behavioural context.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chainsim::Corridor;
use crate::digest::sha256_hex;
use crate::record::TxRecord;

pub const N_FEATURES: usize = 11;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "amount_log",
    "fee_ratio",
    "hour_sin",
    "hour_cos",
    "sender_tx_count_24h",
    "sender_amount_sum_24h_log",
    "corridor_risk",
    "new_receiver",
    "time_since_last_tx_log",
    "round_amount",
    "amount_robust_z",
];

pub const F_AMOUNT_LOG: usize = 0;
pub const F_FEE_RATIO: usize = 1;
pub const F_HOUR_SIN: usize = 2;
pub const F_HOUR_COS: usize = 3;
pub const F_TX_COUNT_24H: usize = 4;
pub const F_AMOUNT_SUM_24H_LOG: usize = 5;
pub const F_CORRIDOR_RISK: usize = 6;
pub const F_NEW_RECEIVER: usize = 7;
pub const F_SINCE_LAST_LOG: usize = 8;
pub const F_ROUND_AMOUNT: usize = 9;
pub const F_AMOUNT_ROBUST_Z: usize = 10;

/// Binary features are left unscaled by the normalizer.
pub const BINARY_FEATURES: [usize; 2] = [F_NEW_RECEIVER, F_ROUND_AMOUNT];

/// Risk assumed for a corridor missing from the table.
pub const UNKNOWN_CORRIDOR_RISK: f64 = 0.5;
const WINDOW_24H: i64 = 86_400;
const ROBUST_Z_TRAILING: usize = 30;
/// 100 major units, assuming two-decimal currencies.
const ROUND_UNIT_MINOR: u64 = 100_00;

/// Digest of the feature-name list; models record it so scoring can refuse
/// vectors built under a different schema.
pub fn schema_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| sha256_hex(FEATURE_NAMES.join("\n")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }

    pub fn schema_hash(&self) -> &'static str {
        schema_hash()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("history item {history_hash} at {history_ts} does not precede {tx_hash} at {tx_ts}")]
    TimeOrderViolation {
        tx_hash: String,
        tx_ts: i64,
        history_hash: String,
        history_ts: i64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureWarning {
    UnknownCorridor { source: String, destination: String },
}

/// Corridor risk lookup, taken from the scenario corridor table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorridorTable {
    risks: BTreeMap<String, f64>,
}

fn corridor_key(source: &str, destination: &str) -> String {
    format!("{source}>{destination}")
}

impl CorridorTable {
    pub fn from_corridors(corridors: &[Corridor]) -> Self {
        CorridorTable {
            risks: corridors
                .iter()
                .map(|c| (corridor_key(&c.source, &c.destination), c.risk))
                .collect(),
        }
    }

    pub fn risk(&self, source: &str, destination: &str) -> Option<f64> {
        self.risks.get(&corridor_key(source, destination)).copied()
    }

    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub vector: FeatureVector,
    pub warnings: Vec<FeatureWarning>,
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median and MAD of the sender's last 30 amounts, or `None` for an empty history.
fn trailing_median_mad(history: &[&TxRecord]) -> Option<(f64, f64)> {
    if history.is_empty() {
        return None;
    }
    let tail = &history[history.len().saturating_sub(ROBUST_Z_TRAILING)..];
    let mut amounts: Vec<f64> = tail.iter().map(|t| t.amount_minor as f64).collect();
    amounts.sort_by(f64::total_cmp);
    let med = median(&amounts);
    let mut dev: Vec<f64> = amounts.iter().map(|a| (a - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Some((med, median(&dev)))
}

/// Builds the feature vector of `record` given the sender's earlier
/// transactions, oldest first.
pub fn extract_features(
    record: &TxRecord,
    history: &[&TxRecord],
    corridors: &CorridorTable,
) -> Result<Extracted, FeatureError> {
    let ts = record.epoch_seconds();
    let mut prev_ts = i64::MIN;
    for h in history {
        let hts = h.epoch_seconds();
        if hts >= ts || hts < prev_ts {
            return Err(FeatureError::TimeOrderViolation {
                tx_hash: record.tx_hash.clone(),
                tx_ts: ts,
                history_hash: h.tx_hash.clone(),
                history_ts: hts,
            });
        }
        prev_ts = hts;
    }

    let amount = record.amount_minor as f64;
    let mut v = [0.0; N_FEATURES];
    let mut warnings = Vec::new();

    v[F_AMOUNT_LOG] = amount.ln();
    v[F_FEE_RATIO] = (record.fee_minor + record.gas_fee_minor) as f64 / amount;
    let hour = ts.rem_euclid(86_400) as f64 / 3600.0;
    let angle = 2.0 * PI * hour / 24.0;
    v[F_HOUR_SIN] = angle.sin();
    v[F_HOUR_COS] = angle.cos();

    let window_start = history.partition_point(|h| h.epoch_seconds() <= ts - WINDOW_24H);
    let window = &history[window_start..];
    v[F_TX_COUNT_24H] = window.len() as f64;
    let sum: u64 = window.iter().map(|h| h.amount_minor).sum();
    v[F_AMOUNT_SUM_24H_LOG] = (1.0 + sum as f64).ln();

    v[F_CORRIDOR_RISK] = match corridors.risk(&record.currency, &record.destination_currency) {
        Some(r) => r,
        None => {
            warnings.push(FeatureWarning::UnknownCorridor {
                source: record.currency.clone(),
                destination: record.destination_currency.clone(),
            });
            UNKNOWN_CORRIDOR_RISK
        }
    };
    let seen = history.iter().any(|h| h.receiver_id == record.receiver_id);
    v[F_NEW_RECEIVER] = if seen { 0.0 } else { 1.0 };
    v[F_SINCE_LAST_LOG] = match history.last() {
        Some(last) => (1.0 + (ts - last.epoch_seconds()) as f64).ln(),
        None => 0.0,
    };
    v[F_ROUND_AMOUNT] = if record.amount_minor.is_multiple_of(ROUND_UNIT_MINOR) {
        1.0
    } else {
        0.0
    };
    v[F_AMOUNT_ROBUST_Z] = match trailing_median_mad(history) {
        Some((med, mad)) => (amount - med) / mad.max(1.0),
        None => 0.0,
    };

    Ok(Extracted {
        vector: FeatureVector(v),
        warnings,
    })
}

/// A featurized transaction with its binary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub tx_hash: String,
    pub timestamp: i64,
    pub sender_id: String,
    pub features: FeatureVector,
    /// 0 legit, 1 fraud.
    pub label: u8,
}

/// Featurizes a dataset, giving each record the sender's strictly earlier
/// transactions as history. Output is ordered by (timestamp, tx_hash).
pub fn featurize(records: &[TxRecord], corridors: &CorridorTable) -> Vec<LabeledVector> {
    let mut order: Vec<&TxRecord> = records.iter().collect();
    order.sort_by(|a, b| {
        a.epoch_seconds()
            .cmp(&b.epoch_seconds())
            .then_with(|| a.tx_hash.cmp(&b.tx_hash))
    });
    let mut by_sender: HashMap<&str, Vec<&TxRecord>> = HashMap::new();
    let mut out = Vec::with_capacity(order.len());
    for rec in order {
        let hist = by_sender.entry(rec.sender_id.as_str()).or_default();
        let ts = rec.epoch_seconds();
        let cut = hist.partition_point(|h| h.epoch_seconds() < ts);
        let extracted =
            extract_features(rec, &hist[..cut], corridors).expect("history is cut strictly before the record");
        hist.push(rec);
        out.push(LabeledVector {
            tx_hash: rec.tx_hash.clone(),
            timestamp: ts,
            sender_id: rec.sender_id.clone(),
            features: extracted.vector,
            label: rec.label.as_binary(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{from_epoch_seconds, Label, Reason};

    pub(crate) fn tx(hash: &str, ts: i64, amount: u64, receiver: &str) -> TxRecord {
        TxRecord {
            tx_hash: hash.to_string(),
            sender_id: "C000001".into(),
            sender_name: "A".into(),
            sender_address: "1 Road".into(),
            sender_identification_number: "ID-1".into(),
            sender_wallet: format!("0x{}", "a".repeat(40)),
            receiver_id: receiver.to_string(),
            receiver_name: "B".into(),
            receiver_address: "2 Road".into(),
            receiver_identification_number: "ID-2".into(),
            receiver_wallet: format!("0x{}", "b".repeat(40)),
            amount_minor: amount,
            currency: "USD".into(),
            destination_currency: "MXN".into(),
            reason: Reason::FamilySupport,
            timestamp: from_epoch_seconds(ts),
            fee_minor: 0,
            gas_fee_minor: 0,
            block_height: 1,
            label: Label::Legit,
        }
    }

    fn table() -> CorridorTable {
        CorridorTable::from_corridors(&[Corridor::new("USD", "MXN", 0.2)])
    }

    #[test]
    fn empty_history_defaults() {
        let amount = 10f64.exp().round() as u64;
        let rec = tx("h", 1_000_000, amount, "R1");
        let v = extract_features(&rec, &[], &table()).unwrap().vector.0;
        assert!((v[F_AMOUNT_LOG] - (amount as f64).ln()).abs() < 1e-15);
        assert!((v[F_AMOUNT_LOG] - 10.0).abs() < 1e-4);
        assert_eq!(v[F_TX_COUNT_24H], 0.0);
        assert_eq!(v[F_AMOUNT_SUM_24H_LOG], 0.0);
        assert_eq!(v[F_NEW_RECEIVER], 1.0);
        assert_eq!(v[F_SINCE_LAST_LOG], 0.0);
        assert_eq!(v[F_AMOUNT_ROBUST_Z], 0.0);
        assert_eq!(v[F_CORRIDOR_RISK], 0.2);
    }

    #[test]
    fn window_sum_over_past_day() {
        let t = 10 * 86_400;
        let old = tx("h0", t - 90_000, 5_000, "R1");
        let a = tx("h1", t - 80_000, 200, "R1");
        let b = tx("h2", t - 3_600, 300, "R2");
        let c = tx("h3", t - 60, 500, "R1");
        let rec = tx("h4", t, 700, "R1");
        let hist = [&old, &a, &b, &c];
        let v = extract_features(&rec, &hist, &table()).unwrap().vector.0;
        assert_eq!(v[F_TX_COUNT_24H], 3.0);
        assert_eq!(v[F_AMOUNT_SUM_24H_LOG], 1001f64.ln());
        assert_eq!(v[F_NEW_RECEIVER], 0.0);
        assert_eq!(v[F_SINCE_LAST_LOG], 61f64.ln());
    }

    #[test]
    fn time_order_violation() {
        let later = tx("h1", 2_000, 100, "R");
        let rec = tx("h2", 1_000, 100, "R");
        assert!(matches!(
            extract_features(&rec, &[&later], &table()),
            Err(FeatureError::TimeOrderViolation { .. })
        ));
        let same = tx("h3", 1_000, 100, "R");
        assert!(extract_features(&rec, &[&same], &table()).is_err());
    }

    #[test]
    fn hour_on_unit_circle_and_round_flag() {
        let rec = tx("h", 6 * 3600, 250_00, "R");
        let v = extract_features(&rec, &[], &table()).unwrap().vector.0;
        assert!((v[F_HOUR_SIN] - 1.0).abs() < 1e-12);
        assert!(v[F_HOUR_COS].abs() < 1e-12);
        assert_eq!(v[F_ROUND_AMOUNT], 0.0);
        let rec = tx("h", 0, 300_00, "R");
        let v = extract_features(&rec, &[], &table()).unwrap().vector.0;
        assert_eq!(v[F_ROUND_AMOUNT], 1.0);
        assert_eq!(v[F_HOUR_COS], 1.0);
    }

    #[test]
    fn robust_z_uses_mad_floor() {
        let a = tx("a", 10, 1000, "R");
        let b = tx("b", 20, 1000, "R");
        let rec = tx("c", 30, 1500, "R");
        let v = extract_features(&rec, &[&a, &b], &table()).unwrap().vector.0;
        assert_eq!(v[F_AMOUNT_ROBUST_Z], 500.0);
        let c = tx("c0", 25, 3000, "R");
        // amounts 1000,1000,3000: median 1000, deviations 0,0,2000 -> MAD 0 -> floor 1
        let v = extract_features(&rec, &[&a, &b, &c], &table()).unwrap().vector.0;
        assert_eq!(v[F_AMOUNT_ROBUST_Z], 500.0);
        let d = tx("d", 26, 2000, "R");
        // 1000,1000,2000,3000: median 1500, deviations 500,500,500,1500 -> MAD 500
        let v = extract_features(&rec, &[&a, &b, &c, &d], &table()).unwrap().vector.0;
        assert_eq!(v[F_AMOUNT_ROBUST_Z], 0.0);
    }

    #[test]
    fn unknown_corridor_warns() {
        let mut rec = tx("h", 0, 1000, "R");
        rec.destination_currency = "ZZZ".into();
        let e = extract_features(&rec, &[], &table()).unwrap();
        assert_eq!(e.vector.0[F_CORRIDOR_RISK], UNKNOWN_CORRIDOR_RISK);
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn schema_hash_is_stable() {
        assert_eq!(schema_hash(), sha256_hex(FEATURE_NAMES.join("\n")));
        assert_eq!(schema_hash().len(), 64);
    }
}
