use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{field_type, field_value, AnalyticsError, FieldType, FieldValue, ScoreLookup};
use crate::record::TxRecord;

pub const MAX_LIMIT: usize = 10_000;
pub const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "=", alias = "==", alias = "eq")]
    Eq,
    #[serde(rename = "!=", alias = "≠", alias = "ne")]
    Ne,
    #[serde(rename = "<", alias = "lt")]
    Lt,
    #[serde(rename = "<=", alias = "≤", alias = "le")]
    Le,
    #[serde(rename = ">", alias = "gt")]
    Gt,
    #[serde(rename = ">=", alias = "≥", alias = "ge")]
    Ge,
    #[serde(rename = "contains")]
    Contains,
    #[serde(rename = "in")]
    In,
}

impl Op {
    pub fn as_str(&self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Contains => "contains",
            Op::In => "in",
        }
    }

    fn applies_to(&self, ty: FieldType) -> bool {
        match self {
            Op::Eq | Op::Ne | Op::In => true,
            Op::Lt | Op::Le | Op::Gt | Op::Ge => ty != FieldType::Text,
            Op::Contains => ty == FieldType::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub field: String,
    pub op: Op,
    pub value: Value,
}

/// `[from, to)`; either end may be open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRange {
    #[serde(default, with = "opt_iso")]
    pub from: Option<DateTime<Utc>>,
    #[serde(default, with = "opt_iso")]
    pub to: Option<DateTime<Utc>>,
}

impl TimeRange {
    pub fn contains(&self, ts: i64) -> bool {
        self.from.is_none_or(|f| ts >= f.timestamp()) && self.to.is_none_or(|t| ts < t.timestamp())
    }
}

mod opt_iso {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::record::{format_timestamp, parse_timestamp};

    pub fn serialize<S: Serializer>(ts: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match ts {
            Some(t) => s.serialize_str(&format_timestamp(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_timestamp(&s).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp `{s}`"))))
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sort {
    pub field: String,
    #[serde(default)]
    pub direction: Direction,
}

impl Default for Sort {
    fn default() -> Self {
        Self {
            field: "timestamp".into(),
            direction: Direction::Asc,
        }
    }
}

fn default_limit() -> usize {
    DEFAULT_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default)]
    pub sort: Sort,
    #[serde(default = "default_limit")]
    pub limit: usize,
    #[serde(default)]
    pub offset: usize,
}

impl Default for Query {
    fn default() -> Self {
        Self {
            filters: Vec::new(),
            time_range: TimeRange::default(),
            sort: Sort::default(),
            limit: DEFAULT_LIMIT,
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPage {
    /// Records matching the filters before paging.
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub records: Vec<TxRecord>,
}

/// A filter with its operand resolved to the field's type.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    field: String,
    op: Op,
    operands: Vec<FieldValue>,
}

impl Compiled {
    fn matches(&self, v: &FieldValue) -> bool {
        // unscored records never satisfy a predicate on a score field
        if *v == FieldValue::Null {
            return false;
        }
        let o = &self.operands[0];
        match self.op {
            Op::Eq => v.cmp_total(o) == Ordering::Equal,
            Op::Ne => v.cmp_total(o) != Ordering::Equal,
            Op::Lt => v.cmp_total(o) == Ordering::Less,
            Op::Le => v.cmp_total(o) != Ordering::Greater,
            Op::Gt => v.cmp_total(o) == Ordering::Greater,
            Op::Ge => v.cmp_total(o) != Ordering::Less,
            Op::Contains => match (v, o) {
                (FieldValue::Text(s), FieldValue::Text(needle)) => s.contains(needle.as_str()),
                _ => false,
            },
            Op::In => self.operands.iter().any(|o| v.cmp_total(o) == Ordering::Equal),
        }
    }
}

pub(crate) fn compile(filters: &[Filter]) -> Result<Vec<Compiled>, AnalyticsError> {
    filters
        .iter()
        .map(|f| {
            let ty = field_type(&f.field)?;
            if !f.op.applies_to(ty) {
                return Err(AnalyticsError::BadOperator {
                    field: f.field.clone(),
                    op: f.op.as_str().to_string(),
                });
            }
            let operands = match f.op {
                Op::In => match &f.value {
                    Value::Array(items) => items
                        .iter()
                        .map(|v| FieldValue::parse(&f.field, ty, v))
                        .collect::<Result<Vec<_>, _>>()?,
                    _ => {
                        return Err(AnalyticsError::BadValue {
                            field: f.field.clone(),
                            reason: "`in` takes a list".into(),
                        })
                    }
                },
                _ => vec![FieldValue::parse(&f.field, ty, &f.value)?],
            };
            Ok(Compiled {
                field: f.field.clone(),
                op: f.op,
                operands,
            })
        })
        .collect()
}

/// Records passing the filters and time range, in their input order.
pub(crate) fn matching<'a>(
    records: &'a [TxRecord],
    scores: &dyn ScoreLookup,
    filters: &[Filter],
    range: &TimeRange,
) -> Result<Vec<&'a TxRecord>, AnalyticsError> {
    let compiled = compile(filters)?;
    Ok(records
        .iter()
        .filter(|r| range.contains(r.epoch_seconds()))
        .filter(|r| compiled.iter().all(|c| c.matches(&field_value(r, scores, &c.field))))
        .collect())
}

impl Query {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.limit > MAX_LIMIT {
            return Err(AnalyticsError::LimitTooLarge(self.limit));
        }
        field_type(&self.sort.field)?;
        compile(&self.filters).map(|_| ())
    }
}

pub fn run_query(records: &[TxRecord], scores: &dyn ScoreLookup, q: &Query) -> Result<QueryPage, AnalyticsError> {
    q.validate()?;
    let hits = matching(records, scores, &q.filters, &q.time_range)?;
    let mut keyed: Vec<(FieldValue, &TxRecord)> = hits
        .into_iter()
        .map(|r| (field_value(r, scores, &q.sort.field), r))
        .collect();
    keyed.sort_by(|(a, ra), (b, rb)| {
        let primary = match (a, b, q.sort.direction) {
            // missing values stay last in both directions
            (FieldValue::Null, _, _) | (_, FieldValue::Null, _) => a.cmp_total(b),
            (_, _, Direction::Asc) => a.cmp_total(b),
            (_, _, Direction::Desc) => b.cmp_total(a),
        };
        primary.then_with(|| ra.tx_hash.cmp(&rb.tx_hash))
    });
    let total = keyed.len();
    let records = keyed
        .into_iter()
        .skip(q.offset)
        .take(q.limit)
        .map(|(_, r)| r.clone())
        .collect();
    Ok(QueryPage {
        total,
        offset: q.offset,
        limit: q.limit,
        records,
    })
}
