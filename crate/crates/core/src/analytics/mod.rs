//! Ad hoc queries, summaries, statistics, reports and dashboard payloads.
//!
//! Everything here is a pure function of the records (and optional risk
//! scores) handed in, so results are reproducible from any snapshot.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde_json::Value;
use thiserror::Error;

use crate::record::{format_timestamp, from_epoch_seconds, parse_timestamp, TxRecord};
use crate::riskengine::RiskScore;

pub mod dashboard;
pub mod query;
pub mod report;
pub mod stats;
pub mod summary;
pub mod workspace;

pub use dashboard::{dashboard_snapshot, CorridorVolume, DashboardPayload, ModelCard};
pub use query::{run_query, Direction, Filter, Op, Query, QueryPage, Sort, TimeRange, MAX_LIMIT};
pub use report::{
    category_counts, generate_report, ChartData, ChartKind, ChartPoint, ChartSpec, RenderedSection, Report, ReportSpec,
    Section,
};
pub use stats::{descriptive_stats, drill_down, trend_line, DescriptiveStats, DrillDown, TrendLine};
pub use summary::{summarize, AggOp, AggregateSpec, CalculatedField, Expr, SummaryRow, SummarySpec, SummaryTable};
pub use workspace::{annotate, EntityKind, MetadataAnnotation, Target, WorkingSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("operator `{op}` does not apply to field `{field}`")]
    BadOperator { field: String, op: String },
    #[error("bad value for `{field}`: {reason}")]
    BadValue { field: String, reason: String },
    #[error("aggregate `{aggregate}` does not apply to field `{field}`")]
    TypeMismatch { field: String, aggregate: String },
    #[error("limit {0} exceeds {MAX_LIMIT}")]
    LimitTooLarge(usize),
    #[error("series is empty")]
    EmptySeries,
    #[error("all abscissae are equal")]
    DegenerateAbscissa,
    #[error("unknown customer `{0}`")]
    UnknownCustomer(String),
    #[error("invalid report section {section}: {reason}")]
    InvalidSpec { section: String, reason: String },
    #[error("{kind} `{id}` does not exist")]
    TargetNotFound { kind: String, id: String },
}

/// Risk scores keyed by transaction hash.
pub trait ScoreLookup {
    fn score_of(&self, tx_hash: &str) -> Option<&RiskScore>;
}

/// For data that has not been scored.
pub struct NoScores;

impl ScoreLookup for NoScores {
    fn score_of(&self, _: &str) -> Option<&RiskScore> {
        None
    }
}

impl ScoreLookup for BTreeMap<String, RiskScore> {
    fn score_of(&self, tx_hash: &str) -> Option<&RiskScore> {
        self.get(tx_hash)
    }
}

impl ScoreLookup for HashMap<String, RiskScore> {
    fn score_of(&self, tx_hash: &str) -> Option<&RiskScore> {
        self.get(tx_hash)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Text,
    Int,
    Real,
    Time,
}

/// Queryable fields: the wire record, the derived corridor, and score fields.
pub const FIELDS: &[(&str, FieldType)] = &[
    ("tx_hash", FieldType::Text),
    ("sender_id", FieldType::Text),
    ("sender_name", FieldType::Text),
    ("sender_address", FieldType::Text),
    ("sender_identification_number", FieldType::Text),
    ("sender_wallet", FieldType::Text),
    ("receiver_id", FieldType::Text),
    ("receiver_name", FieldType::Text),
    ("receiver_address", FieldType::Text),
    ("receiver_identification_number", FieldType::Text),
    ("receiver_wallet", FieldType::Text),
    ("amount_minor", FieldType::Int),
    ("currency", FieldType::Text),
    ("destination_currency", FieldType::Text),
    ("reason", FieldType::Text),
    ("timestamp", FieldType::Time),
    ("fee_minor", FieldType::Int),
    ("gas_fee_minor", FieldType::Int),
    ("block_height", FieldType::Int),
    ("label", FieldType::Text),
    ("corridor", FieldType::Text),
    ("probability", FieldType::Real),
    ("anomaly_score", FieldType::Real),
    ("tier", FieldType::Text),
];

pub fn field_type(name: &str) -> Result<FieldType, AnalyticsError> {
    FIELDS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| AnalyticsError::UnknownField(name.to_string()))
}

/// A typed field value. `Null` marks an unscored score field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Null,
    Int(u64),
    Real(f64),
    Text(String),
    Time(i64),
}

impl FieldValue {
    /// Same-type ordering with `Null` after everything.
    pub fn cmp_total(&self, other: &FieldValue) -> Ordering {
        use FieldValue::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Null, _) => Ordering::Greater,
            (_, Null) => Ordering::Less,
            (Int(a), Int(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (Time(a), Time(b)) => a.cmp(b),
            _ => Ordering::Equal,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Int(v) => Some(*v as f64),
            FieldValue::Real(v) => Some(*v),
            FieldValue::Time(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            FieldValue::Null => Value::Null,
            FieldValue::Int(v) => Value::from(*v),
            FieldValue::Real(v) => Value::from(*v),
            FieldValue::Text(s) => Value::from(s.as_str()),
            FieldValue::Time(t) => Value::from(format_timestamp(&from_epoch_seconds(*t))),
        }
    }

    /// Human-readable form used for chart categories and Markdown tables.
    pub fn label(&self) -> String {
        match self {
            FieldValue::Null => "(none)".into(),
            FieldValue::Text(s) => s.clone(),
            other => match other.to_json() {
                Value::String(s) => s,
                v => v.to_string(),
            },
        }
    }

    /// Parses a filter operand for a field of type `ty`.
    pub(crate) fn parse(field: &str, ty: FieldType, v: &Value) -> Result<FieldValue, AnalyticsError> {
        let bad = |reason: &str| AnalyticsError::BadValue {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        match ty {
            FieldType::Text => v
                .as_str()
                .map(|s| FieldValue::Text(s.to_string()))
                .ok_or_else(|| bad("expected a string")),
            FieldType::Int => v
                .as_u64()
                .map(FieldValue::Int)
                .ok_or_else(|| bad("expected a non-negative integer")),
            FieldType::Real => v
                .as_f64()
                .filter(|f| f.is_finite())
                .map(FieldValue::Real)
                .ok_or_else(|| bad("expected a number")),
            FieldType::Time => match v {
                Value::String(s) => parse_timestamp(s)
                    .map(|t| FieldValue::Time(t.timestamp()))
                    .ok_or_else(|| bad("expected an ISO-8601 timestamp")),
                Value::Number(n) => n
                    .as_i64()
                    .map(FieldValue::Time)
                    .ok_or_else(|| bad("expected epoch seconds")),
                _ => Err(bad("expected an ISO-8601 timestamp or epoch seconds")),
            },
        }
    }
}

/// Reads one named field. The name must come from [`FIELDS`].
pub fn field_value(record: &TxRecord, scores: &dyn ScoreLookup, name: &str) -> FieldValue {
    use FieldValue::*;
    let text = |s: &str| Text(s.to_string());
    match name {
        "tx_hash" => text(&record.tx_hash),
        "sender_id" => text(&record.sender_id),
        "sender_name" => text(&record.sender_name),
        "sender_address" => text(&record.sender_address),
        "sender_identification_number" => text(&record.sender_identification_number),
        "sender_wallet" => text(&record.sender_wallet),
        "receiver_id" => text(&record.receiver_id),
        "receiver_name" => text(&record.receiver_name),
        "receiver_address" => text(&record.receiver_address),
        "receiver_identification_number" => text(&record.receiver_identification_number),
        "receiver_wallet" => text(&record.receiver_wallet),
        "amount_minor" => Int(record.amount_minor),
        "currency" => text(&record.currency),
        "destination_currency" => text(&record.destination_currency),
        "reason" => text(record.reason.as_str()),
        "timestamp" => Time(record.epoch_seconds()),
        "fee_minor" => Int(record.fee_minor),
        "gas_fee_minor" => Int(record.gas_fee_minor),
        "block_height" => Int(record.block_height),
        "label" => Text(record.label.to_string()),
        "corridor" => Text(format!("{}>{}", record.currency, record.destination_currency)),
        "probability" => scores.score_of(&record.tx_hash).map_or(Null, |s| Real(s.probability)),
        "anomaly_score" => scores.score_of(&record.tx_hash).map_or(Null, |s| Real(s.anomaly_score)),
        "tier" => scores
            .score_of(&record.tx_hash)
            .map_or(Null, |s| Text(s.tier.to_string())),
        _ => Null,
    }
}
