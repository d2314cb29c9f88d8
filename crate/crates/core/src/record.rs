//! The line-delimited transaction record shared by the simulator export,
//! the validation pipeline, the risk engine and the analytics layer.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Known fraud generators. The string form is what appears after `fraud:` in a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FraudPattern {
    Structuring,
    AccountTakeover,
    MuleFanIn,
    VelocityBurst,
}

impl FraudPattern {
    pub const ALL: [FraudPattern; 4] = [
        FraudPattern::Structuring,
        FraudPattern::AccountTakeover,
        FraudPattern::MuleFanIn,
        FraudPattern::VelocityBurst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FraudPattern::Structuring => "structuring",
            FraudPattern::AccountTakeover => "account_takeover",
            FraudPattern::MuleFanIn => "mule_fan_in",
            FraudPattern::VelocityBurst => "velocity_burst",
        }
    }
}

impl fmt::Display for FraudPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FraudPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FraudPattern::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown fraud pattern `{s}`"))
    }
}

impl Serialize for FraudPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FraudPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ground-truth label: `legit` or `fraud:<pattern>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Legit,
    Fraud(FraudPattern),
}

impl Label {
    pub fn is_fraud(&self) -> bool {
        matches!(self, Label::Fraud(_))
    }

    /// 0 for legit, 1 for any fraud pattern.
    pub fn as_binary(&self) -> u8 {
        u8::from(self.is_fraud())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Legit => f.write_str("legit"),
            Label::Fraud(p) => write!(f, "fraud:{p}"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "legit" {
            return Ok(Label::Legit);
        }
        match s.strip_prefix("fraud:") {
            Some(p) => Ok(Label::Fraud(p.parse()?)),
            None => Err(format!("label must be `legit` or `fraud:<pattern>`, got `{s}`")),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Transfer reason as recorded on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    FamilySupport,
    Education,
    Medical,
    Business,
    Other,
}

impl Reason {
    pub const ALL: [Reason; 5] = [
        Reason::FamilySupport,
        Reason::Education,
        Reason::Medical,
        Reason::Business,
        Reason::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::FamilySupport => "family-support",
            Reason::Education => "education",
            Reason::Medical => "medical",
            Reason::Business => "business",
            Reason::Other => "other",
        }
    }

    pub fn from_canonical(s: &str) -> Option<Reason> {
        Reason::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One exported, mined transaction. Field order is the wire order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub tx_hash: String,
    pub sender_id: String,
    pub sender_name: String,
    pub sender_address: String,
    pub sender_identification_number: String,
    pub sender_wallet: String,
    pub receiver_id: String,
    pub receiver_name: String,
    pub receiver_address: String,
    pub receiver_identification_number: String,
    pub receiver_wallet: String,
    pub amount_minor: u64,
    pub currency: String,
    pub destination_currency: String,
    pub reason: Reason,
    #[serde(with = "iso_seconds")]
    pub timestamp: DateTime<Utc>,
    pub fee_minor: u64,
    pub gas_fee_minor: u64,
    pub block_height: u64,
    pub label: Label,
}

impl TxRecord {
    pub fn epoch_seconds(&self) -> i64 {
        self.timestamp.timestamp()
    }

    pub fn corridor(&self) -> (&str, &str) {
        (&self.currency, &self.destination_currency)
    }
}

/// Formats whole-second UTC timestamps as `2023-01-01T00:00:13Z`.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc))
}

pub fn from_epoch_seconds(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0)
        .single()
        .expect("simulated clock stays inside chrono's range")
}

pub mod iso_seconds {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).ok_or_else(|| serde::de::Error::custom(format!("bad ISO-8601 timestamp `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_strings() {
        assert_eq!(Label::Legit.to_string(), "legit");
        let l: Label = "fraud:mule_fan_in".parse().unwrap();
        assert_eq!(l, Label::Fraud(FraudPattern::MuleFanIn));
        assert!("fraud:phishing".parse::<Label>().is_err());
        assert!("ok".parse::<Label>().is_err());
    }

    #[test]
    fn timestamp_format_is_whole_seconds_zulu() {
        let t = from_epoch_seconds(1_672_531_213);
        assert_eq!(format_timestamp(&t), "2023-01-01T00:00:13Z");
        assert_eq!(parse_timestamp("2023-01-01T00:00:13Z"), Some(t));
    }
}
