//! Queries and summaries by full scans over the serialized records.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use remitwatch_core::analytics::{AggOp, Direction, Expr, Filter, Op, Query, SummarySpec, TimeRange};
use remitwatch_core::riskengine::RiskScore;
use remitwatch_core::TxRecord;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum V {
    Missing,
    U(u64),
    F(f64),
    S(String),
    T(i64),
}

const INTS: [&str; 4] = ["amount_minor", "fee_minor", "gas_fee_minor", "block_height"];
const REALS: [&str; 2] = ["probability", "anomaly_score"];

fn parse_iso(s: &str) -> i64 {
    DateTime::parse_from_rfc3339(s).unwrap().timestamp()
}

/// Reads a field from the record's wire form, the corridor, or the score.
pub fn value(r: &TxRecord, scores: &BTreeMap<String, RiskScore>, field: &str) -> V {
    let score = scores.get(&r.tx_hash);
    match field {
        "corridor" => V::S(format!("{}>{}", r.currency, r.destination_currency)),
        "probability" => score.map_or(V::Missing, |s| V::F(s.probability)),
        "anomaly_score" => score.map_or(V::Missing, |s| V::F(s.anomaly_score)),
        "tier" => score.map_or(V::Missing, |s| {
            V::S(serde_json::to_value(s.tier).unwrap().as_str().unwrap().into())
        }),
        _ => {
            let wire = serde_json::to_value(r).unwrap();
            match &wire[field] {
                Value::String(s) if field == "timestamp" => V::T(parse_iso(s)),
                Value::String(s) => V::S(s.clone()),
                Value::Number(n) => V::U(n.as_u64().unwrap()),
                other => panic!("unexpected {field}: {other}"),
            }
        }
    }
}

fn operand(field: &str, v: &Value) -> V {
    if INTS.contains(&field) {
        V::U(v.as_u64().unwrap())
    } else if REALS.contains(&field) {
        V::F(v.as_f64().unwrap())
    } else if field == "timestamp" {
        match v {
            Value::String(s) => V::T(parse_iso(s)),
            n => V::T(n.as_i64().unwrap()),
        }
    } else {
        V::S(v.as_str().unwrap().into())
    }
}

fn compare(a: &V, b: &V) -> Ordering {
    match (a, b) {
        (V::U(x), V::U(y)) => x.cmp(y),
        (V::F(x), V::F(y)) => x.partial_cmp(y).unwrap(),
        (V::S(x), V::S(y)) => x.cmp(y),
        (V::T(x), V::T(y)) => x.cmp(y),
        _ => panic!("incomparable {a:?} {b:?}"),
    }
}

fn passes(f: &Filter, v: &V) -> bool {
    if *v == V::Missing {
        return false;
    }
    if f.op == Op::In {
        return f
            .value
            .as_array()
            .unwrap()
            .iter()
            .any(|o| compare(v, &operand(&f.field, o)) == Ordering::Equal);
    }
    let o = operand(&f.field, &f.value);
    match f.op {
        Op::Eq => compare(v, &o) == Ordering::Equal,
        Op::Ne => compare(v, &o) != Ordering::Equal,
        Op::Lt => compare(v, &o) == Ordering::Less,
        Op::Le => compare(v, &o) != Ordering::Greater,
        Op::Gt => compare(v, &o) == Ordering::Greater,
        Op::Ge => compare(v, &o) != Ordering::Less,
        Op::Contains => match (v, &o) {
            (V::S(s), V::S(n)) => s.contains(n.as_str()),
            _ => false,
        },
        Op::In => unreachable!(),
    }
}

fn in_range(r: &TxRecord, range: &TimeRange) -> bool {
    let t = r.timestamp.timestamp();
    range.from.is_none_or(|f: DateTime<Utc>| t >= f.timestamp())
        && range.to.is_none_or(|e: DateTime<Utc>| t < e.timestamp())
}

pub fn select<'a>(
    records: &'a [TxRecord],
    scores: &BTreeMap<String, RiskScore>,
    filters: &[Filter],
    range: &TimeRange,
) -> Vec<&'a TxRecord> {
    let mut out = Vec::new();
    for r in records {
        if in_range(r, range) && filters.iter().all(|f| passes(f, &value(r, scores, &f.field))) {
            out.push(r);
        }
    }
    out
}

/// (total matches, hashes of the requested page).
pub fn query(records: &[TxRecord], scores: &BTreeMap<String, RiskScore>, q: &Query) -> (usize, Vec<String>) {
    let mut hits = select(records, scores, &q.filters, &q.time_range);
    let key = |r: &TxRecord| value(r, scores, &q.sort.field);
    // insertion sort keeps the comparison logic in plain sight
    for i in 1..hits.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (key(hits[j - 1]), key(hits[j]));
            let primary = match (&a, &b) {
                (V::Missing, V::Missing) => Ordering::Equal,
                (V::Missing, _) => Ordering::Greater,
                (_, V::Missing) => Ordering::Less,
                _ if q.sort.direction == Direction::Desc => compare(&b, &a),
                _ => compare(&a, &b),
            };
            let order = primary.then_with(|| hits[j - 1].tx_hash.cmp(&hits[j].tx_hash));
            if order != Ordering::Greater {
                break;
            }
            hits.swap(j - 1, j);
            j -= 1;
        }
    }
    let page = hits
        .iter()
        .skip(q.offset)
        .take(q.limit)
        .map(|r| r.tx_hash.clone())
        .collect();
    (hits.len(), page)
}

pub fn to_json(v: &V) -> Value {
    match v {
        V::Missing => Value::Null,
        V::U(x) => Value::from(*x),
        V::F(x) => Value::from(*x),
        V::S(s) => Value::from(s.as_str()),
        V::T(t) => Value::from(
            DateTime::from_timestamp(*t, 0)
                .unwrap()
                .format("%Y-%m-%dT%H:%M:%SZ")
                .to_string(),
        ),
    }
}

fn order_keys(a: &[V], b: &[V]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = match (x, y) {
            (V::Missing, V::Missing) => Ordering::Equal,
            (V::Missing, _) => Ordering::Greater,
            (_, V::Missing) => Ordering::Less,
            _ => compare(x, y),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

fn eval(e: &Expr, row: &BTreeMap<String, Value>) -> Option<f64> {
    let v = match e {
        Expr::Col(c) => row.get(c)?.as_f64()?,
        Expr::Const(c) => *c,
        Expr::Add(a, b) => eval(a, row)? + eval(b, row)?,
        Expr::Sub(a, b) => eval(a, row)? - eval(b, row)?,
        Expr::Mul(a, b) => eval(a, row)? * eval(b, row)?,
        Expr::Div(a, b) => {
            let d = eval(b, row)?;
            if d == 0.0 {
                return None;
            }
            eval(a, row)? / d
        }
    };
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

/// One group: key values, member count, and every output column.
pub type Group = (Vec<Value>, usize, BTreeMap<String, Value>);

pub fn summarize(records: &[TxRecord], scores: &BTreeMap<String, RiskScore>, spec: &SummarySpec) -> Vec<Group> {
    let hits = select(records, scores, &spec.filters, &spec.time_range);
    let mut groups: Vec<(Vec<V>, Vec<&TxRecord>)> = Vec::new();
    for r in hits {
        let key: Vec<V> = spec.group_by.iter().map(|g| value(r, scores, g)).collect();
        match groups.iter_mut().find(|(k, _)| order_keys(k, &key) == Ordering::Equal) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups.sort_by(|a, b| order_keys(&a.0, &b.0));
    let mut out = Vec::new();
    for (key, members) in groups {
        let mut row = BTreeMap::new();
        let mut with_count = row.clone();
        with_count.insert("count".to_string(), Value::from(members.len()));
        for a in &spec.aggregates {
            let v = match &a.field {
                None => Value::from(members.len()),
                Some(f) => {
                    let present: Vec<V> = members
                        .iter()
                        .map(|r| value(r, scores, f))
                        .filter(|v| *v != V::Missing)
                        .collect();
                    match a.op {
                        AggOp::Count => Value::from(present.len()),
                        AggOp::Sum | AggOp::Mean if INTS.contains(&f.as_str()) => {
                            let total: u128 = present
                                .iter()
                                .map(|v| if let V::U(x) = v { u128::from(*x) } else { 0 })
                                .sum();
                            match a.op {
                                AggOp::Sum => Value::from(total as u64),
                                _ if present.is_empty() => Value::Null,
                                _ => Value::from(total as f64 / present.len() as f64),
                            }
                        }
                        AggOp::Sum | AggOp::Mean => {
                            let mut total = 0.0;
                            for v in &present {
                                if let V::F(x) = v {
                                    total += x;
                                }
                            }
                            if present.is_empty() {
                                Value::Null
                            } else if a.op == AggOp::Sum {
                                Value::from(total)
                            } else {
                                Value::from(total / present.len() as f64)
                            }
                        }
                        AggOp::Min | AggOp::Max => {
                            let mut best: Option<&V> = None;
                            for v in &present {
                                let better = match best {
                                    None => true,
                                    Some(b) if a.op == AggOp::Min => compare(v, b) == Ordering::Less,
                                    Some(b) => compare(v, b) == Ordering::Greater,
                                };
                                if better {
                                    best = Some(v);
                                }
                            }
                            best.map_or(Value::Null, to_json)
                        }
                    }
                }
            };
            let col = a.column();
            row.insert(col.clone(), v.clone());
            with_count.insert(col, v);
        }
        for c in &spec.calculated {
            let v = eval(&c.expr, &with_count).map_or(Value::Null, Value::from);
            row.insert(c.name.clone(), v.clone());
            with_count.insert(c.name.clone(), v);
        }
        out.push((key.iter().map(to_json).collect(), members.len(), row));
    }
    out
}

/// Literal descriptive statistics: (n, mean, median, std, min, max, q1, q3).
pub fn describe(xs: &[f64]) -> (usize, f64, f64, Option<f64>, f64, f64, f64, f64) {
    let n = xs.len();
    let mut total = 0.0;
    for x in xs {
        total += x;
    }
    let mean = total / n as f64;
    let std = if n > 1 {
        let mut ss = 0.0;
        for x in xs {
            ss += (x - mean) * (x - mean);
        }
        Some((ss / n as f64).sqrt())
    } else {
        None
    };
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = if lo + 1 < n { lo + 1 } else { n - 1 };
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    (n, mean, q(0.5), std, s[0], s[n - 1], q(0.25), q(0.75))
}

/// Least squares on integer points in exact rational arithmetic; `None`
/// when every abscissa is equal. Returns (slope, intercept, r²).
pub fn trend_exact(points: &[(i64, i64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as i128;
    let sx: i128 = points.iter().map(|p| p.0 as i128).sum();
    let sy: i128 = points.iter().map(|p| p.1 as i128).sum();
    let sxx: i128 = points.iter().map(|p| (p.0 as i128) * (p.0 as i128)).sum();
    let sxy: i128 = points.iter().map(|p| (p.0 as i128) * (p.1 as i128)).sum();
    let syy: i128 = points.iter().map(|p| (p.1 as i128) * (p.1 as i128)).sum();
    let den = n * sxx - sx * sx;
    if den == 0 {
        return None;
    }
    let num = n * sxy - sx * sy;
    let slope = num as f64 / den as f64;
    let intercept = (sy * den - sx * num) as f64 / (n * den) as f64;
    let vy = n * syy - sy * sy;
    let r2 = if vy == 0 {
        1.0
    } else {
        (num as f64 / den as f64) * (num as f64 / vy as f64)
    };
    Some((slope, intercept, r2))
}
