use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::record::{from_epoch_seconds, iso_seconds, FraudPattern};

/// One remittance route: money leaves in `source` and lands in `destination`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub source: String,
    pub destination: String,
    pub risk: f64,
}

impl Corridor {
    pub fn new(source: &str, destination: &str, risk: f64) -> Self {
        Corridor {
            source: source.to_string(),
            destination: destination.to_string(),
            risk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeePolicy {
    /// Minor units charged on every transaction.
    pub base_fee: u64,
    /// Minor units per byte of canonical serialized size.
    pub per_byte_fee: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_customers: usize,
    /// Simulated seconds covered by a run that is not given an explicit block count.
    pub duration: u64,
    #[serde(default = "default_block_interval")]
    pub mean_block_interval: f64,
    pub max_tx_per_block: usize,
    pub fraud_rate: f64,
    pub fraud_mix: BTreeMap<String, f64>,
    pub corridors: Vec<Corridor>,
    /// Regulatory reporting threshold in minor units.
    pub report_threshold: u64,
    pub fee_policy: FeePolicy,
    #[serde(default = "default_start", with = "iso_seconds")]
    pub start_time: DateTime<Utc>,
}

fn default_block_interval() -> f64 {
    13.0
}

fn default_start() -> DateTime<Utc> {
    // 2023-01-01T00:00:00Z
    from_epoch_seconds(1_672_531_200)
}

impl Default for ScenarioConfig {
    /// The reference scenario: seed 7, ~2% fraud spread evenly across the four patterns.
    fn default() -> Self {
        let fraud_mix = FraudPattern::ALL
            .iter()
            .map(|p| (p.as_str().to_string(), 0.25))
            .collect();
        ScenarioConfig {
            seed: 7,
            n_customers: 2000,
            duration: 26_000,
            mean_block_interval: default_block_interval(),
            max_tx_per_block: 64,
            fraud_rate: 0.02,
            fraud_mix,
            corridors: vec![
                Corridor::new("USD", "MXN", 0.20),
                Corridor::new("USD", "PHP", 0.25),
                Corridor::new("USD", "INR", 0.15),
                Corridor::new("USD", "NGN", 0.70),
                Corridor::new("EUR", "MAD", 0.30),
                Corridor::new("EUR", "NGN", 0.60),
                Corridor::new("EUR", "UAH", 0.55),
                Corridor::new("GBP", "PKR", 0.50),
                Corridor::new("GBP", "INR", 0.20),
                Corridor::new("AED", "PHP", 0.35),
            ],
            report_threshold: 10_000_00,
            fee_policy: FeePolicy {
                base_fee: 50,
                per_byte_fee: 1,
            },
            start_time: default_start(),
        }
    }
}

pub(crate) fn is_currency_code(s: &str) -> bool {
    s.len() == 3 && s.bytes().all(|b| b.is_ascii_uppercase())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_customers == 0 {
            return bad("n_customers must be at least 1".into());
        }
        if self.duration == 0 {
            return bad("duration must be > 0".into());
        }
        if !(self.mean_block_interval.is_finite() && self.mean_block_interval > 0.0) {
            return bad("mean_block_interval must be > 0".into());
        }
        if self.max_tx_per_block == 0 {
            return bad("max_tx_per_block must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.fraud_rate) {
            return bad(format!("fraud_rate {} outside [0, 1]", self.fraud_rate));
        }
        let mut total = 0.0;
        for (name, w) in &self.fraud_mix {
            if name.parse::<FraudPattern>().is_err() {
                return bad(format!("fraud_mix names unknown pattern `{name}`"));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return bad(format!("fraud_mix weight for `{name}` must be >= 0"));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("fraud_mix weights sum to {total}, expected 1"));
        }
        if self.corridors.is_empty() {
            return bad("at least one corridor is required".into());
        }
        for c in &self.corridors {
            if !is_currency_code(&c.source) || !is_currency_code(&c.destination) {
                return bad(format!(
                    "corridor {}->{} must use 3-letter uppercase codes",
                    c.source, c.destination
                ));
            }
            if !(0.0..=1.0).contains(&c.risk) {
                return bad(format!(
                    "corridor {}->{} risk {} outside [0, 1]",
                    c.source, c.destination, c.risk
                ));
            }
        }
        if self.report_threshold == 0 {
            return bad("report_threshold must be > 0".into());
        }
        if self.fee_policy.base_fee == 0 || self.fee_policy.per_byte_fee == 0 {
            return bad("fee_policy amounts must be > 0".into());
        }
        Ok(())
    }

    pub fn mix_weight(&self, pattern: FraudPattern) -> f64 {
        self.fraud_mix.get(pattern.as_str()).copied().unwrap_or(0.0)
    }

    /// Number of blocks that covers `duration` at the mean block interval.
    pub fn default_block_count(&self) -> u64 {
        (self.duration as f64 / self.mean_block_interval).ceil() as u64
    }

    pub fn corridor_risk(&self, source: &str, destination: &str) -> Option<f64> {
        self.corridors
            .iter()
            .find(|c| c.source == source && c.destination == destination)
            .map(|c| c.risk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    type Breakage = Box<dyn Fn(&mut ScenarioConfig)>;

    #[test]
    fn rejects_each_broken_invariant() {
        let cases: Vec<(&str, Breakage)> = vec![
            ("n_customers", Box::new(|c| c.n_customers = 0)),
            ("fraud_rate", Box::new(|c| c.fraud_rate = 1.5)),
            (
                "sum to",
                Box::new(|c| {
                    c.fraud_mix.insert("structuring".into(), 0.5);
                }),
            ),
            (
                "unknown pattern",
                Box::new(|c| {
                    c.fraud_mix.insert("phishing".into(), 0.0);
                }),
            ),
            ("corridor", Box::new(|c| c.corridors.clear())),
            ("report_threshold", Box::new(|c| c.report_threshold = 0)),
            ("fee_policy", Box::new(|c| c.fee_policy.base_fee = 0)),
            ("3-letter", Box::new(|c| c.corridors[0].source = "usd".into())),
        ];
        for (needle, mutate) in cases {
            let mut cfg = ScenarioConfig::default();
            mutate(&mut cfg);
            match cfg.validate() {
                Err(SimError::InvalidConfig(msg)) => {
                    assert!(msg.contains(needle), "`{msg}` should mention `{needle}`")
                }
                other => panic!("expected invalid-config for {needle}, got {other:?}"),
            }
        }
    }

    #[test]
    fn config_json_round_trip_fills_defaults() {
        let cfg = ScenarioConfig::default();
        let mut v = serde_json::to_value(&cfg).unwrap();
        v.as_object_mut().unwrap().remove("mean_block_interval");
        v.as_object_mut().unwrap().remove("start_time");
        let back: ScenarioConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, cfg);
    }
}
