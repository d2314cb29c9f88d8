use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::query::{matching, Filter, TimeRange};
use super::{field_type, field_value, AnalyticsError, FieldType, FieldValue, ScoreLookup};
use crate::record::TxRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggOp {
    Count,
    Sum,
    Mean,
    Min,
    Max,
}

impl AggOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggOp::Count => "count",
            AggOp::Sum => "sum",
            AggOp::Mean => "mean",
            AggOp::Min => "min",
            AggOp::Max => "max",
        }
    }

    fn applies_to(&self, ty: FieldType) -> bool {
        match self {
            AggOp::Count => true,
            AggOp::Sum | AggOp::Mean => matches!(ty, FieldType::Int | FieldType::Real),
            AggOp::Min | AggOp::Max => ty != FieldType::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateSpec {
    pub op: AggOp,
    /// Not needed for `count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    /// Column name; defaults to `op_field` or `count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl AggregateSpec {
    pub fn new(op: AggOp, field: Option<&str>) -> Self {
        Self {
            op,
            field: field.map(str::to_string),
            name: None,
        }
    }

    pub fn column(&self) -> String {
        match (&self.name, &self.field) {
            (Some(n), _) => n.clone(),
            (None, Some(f)) => format!("{}_{}", self.op.as_str(), f),
            (None, None) => self.op.as_str().to_string(),
        }
    }
}

/// Arithmetic over aggregate columns, e.g. `{"div": [{"col": "sum_fee_minor"}, {"col": "count"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Col(String),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Col(c) => out.push(c),
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.columns(out);
                b.columns(out);
            }
        }
    }

    /// `None` when an input is missing or a division by zero occurs.
    fn eval(&self, row: &BTreeMap<String, Value>) -> Option<f64> {
        let v = match self {
            Expr::Col(c) => row.get(c)?.as_f64()?,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(row)? + b.eval(row)?,
            Expr::Sub(a, b) => a.eval(row)? - b.eval(row)?,
            Expr::Mul(a, b) => a.eval(row)? * b.eval(row)?,
            Expr::Div(a, b) => {
                let d = b.eval(row)?;
                if d == 0.0 {
                    return None;
                }
                a.eval(row)? / d
            }
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalculatedField {
    pub name: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SummarySpec {
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default)]
    pub group_by: Vec<String>,
    #[serde(default)]
    pub aggregates: Vec<AggregateSpec>,
    #[serde(default)]
    pub calculated: Vec<CalculatedField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: Vec<Value>,
    pub count: usize,
    /// Aggregates and calculated fields by column name; null when undefined.
    pub values: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub group_by: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
    pub total_count: usize,
}

impl SummarySpec {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        for g in &self.group_by {
            field_type(g)?;
        }
        let mut known: Vec<String> = Vec::new();
        for a in &self.aggregates {
            match (&a.field, a.op) {
                (None, AggOp::Count) => {}
                (None, op) => {
                    return Err(AnalyticsError::TypeMismatch {
                        field: String::new(),
                        aggregate: op.as_str().into(),
                    })
                }
                (Some(f), op) => {
                    if !op.applies_to(field_type(f)?) {
                        return Err(AnalyticsError::TypeMismatch {
                            field: f.clone(),
                            aggregate: op.as_str().into(),
                        });
                    }
                }
            }
            known.push(a.column());
        }
        for c in &self.calculated {
            let mut cols = Vec::new();
            c.expr.columns(&mut cols);
            if let Some(missing) = cols.iter().find(|c| !known.iter().any(|k| k == *c) && **c != "count") {
                return Err(AnalyticsError::UnknownField(missing.to_string()));
            }
            known.push(c.name.clone());
        }
        super::query::compile(&self.filters).map(|_| ())
    }
}

/// Integer sums are carried exactly; real sums add in record order.
enum Acc {
    Count,
    IntSum(u128, usize),
    RealSum(f64, usize),
    Extreme(Option<FieldValue>, bool),
}

pub(crate) fn aggregate(spec: &AggregateSpec, rows: &[&TxRecord], scores: &dyn ScoreLookup) -> Value {
    let Some(field) = &spec.field else {
        return Value::from(rows.len());
    };
    let ty = field_type(field).expect("validated");
    let mut acc = match spec.op {
        AggOp::Count => Acc::Count,
        AggOp::Sum | AggOp::Mean if ty == FieldType::Int => Acc::IntSum(0, 0),
        AggOp::Sum | AggOp::Mean => Acc::RealSum(0.0, 0),
        AggOp::Min => Acc::Extreme(None, false),
        AggOp::Max => Acc::Extreme(None, true),
    };
    let mut present = 0usize;
    for r in rows {
        let v = field_value(r, scores, field);
        if v == FieldValue::Null {
            continue;
        }
        present += 1;
        match (&mut acc, &v) {
            (Acc::IntSum(s, n), FieldValue::Int(x)) => {
                *s += u128::from(*x);
                *n += 1;
            }
            (Acc::RealSum(s, n), FieldValue::Real(x)) => {
                *s += x;
                *n += 1;
            }
            (Acc::Extreme(best, is_max), _) => {
                let replace = match best {
                    None => true,
                    Some(b) => {
                        let o = v.cmp_total(b);
                        if *is_max {
                            o.is_gt()
                        } else {
                            o.is_lt()
                        }
                    }
                };
                if replace {
                    *best = Some(v.clone());
                }
            }
            _ => {}
        }
    }
    match (acc, spec.op) {
        (Acc::Count, _) => Value::from(present),
        (Acc::IntSum(s, _), AggOp::Sum) => serde_json::to_value(s).expect("u128 serializes"),
        (Acc::IntSum(s, n), _) => mean_value(s as f64, n),
        (Acc::RealSum(s, n), AggOp::Sum) => {
            if n == 0 {
                Value::Null
            } else {
                Value::from(s)
            }
        }
        (Acc::RealSum(s, n), _) => mean_value(s, n),
        (Acc::Extreme(b, _), _) => b.map_or(Value::Null, |v| v.to_json()),
    }
}

fn mean_value(sum: f64, n: usize) -> Value {
    if n == 0 {
        Value::Null
    } else {
        Value::from(sum / n as f64)
    }
}

pub fn summarize(
    records: &[TxRecord],
    scores: &dyn ScoreLookup,
    spec: &SummarySpec,
) -> Result<SummaryTable, AnalyticsError> {
    spec.validate()?;
    let hits = matching(records, scores, &spec.filters, &spec.time_range)?;
    let mut groups: Vec<(Vec<FieldValue>, Vec<&TxRecord>)> = Vec::new();
    {
        let mut index: BTreeMap<Vec<GroupKey>, usize> = BTreeMap::new();
        for r in &hits {
            let key: Vec<FieldValue> = spec.group_by.iter().map(|g| field_value(r, scores, g)).collect();
            let k: Vec<GroupKey> = key.iter().cloned().map(GroupKey).collect();
            let i = *index.entry(k).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[i].1.push(r);
        }
    }
    groups.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.cmp_total(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut columns: Vec<String> = spec.aggregates.iter().map(AggregateSpec::column).collect();
    columns.extend(spec.calculated.iter().map(|c| c.name.clone()));
    let rows = groups
        .into_iter()
        .map(|(key, members)| {
            let mut values = BTreeMap::new();
            values.insert("count".to_string(), Value::from(members.len()));
            for a in &spec.aggregates {
                values.insert(a.column(), aggregate(a, &members, scores));
            }
            for c in &spec.calculated {
                let v = c.expr.eval(&values).map_or(Value::Null, Value::from);
                values.insert(c.name.clone(), v);
            }
            if !columns.iter().any(|c| c == "count") {
                values.remove("count");
            }
            SummaryRow {
                key: key.iter().map(FieldValue::to_json).collect(),
                count: members.len(),
                values,
            }
        })
        .collect();
    Ok(SummaryTable {
        group_by: spec.group_by.clone(),
        columns,
        rows,
        total_count: hits.len(),
    })
}

/// Orders field values for grouping; same-field values share a type.
#[derive(Debug, Clone)]
struct GroupKey(FieldValue);

impl PartialEq for GroupKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for GroupKey {}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.cmp_total(&other.0)
    }
}
