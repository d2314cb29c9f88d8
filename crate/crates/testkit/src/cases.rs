//! Randomized inputs shared by the oracle suites and the acceptance run.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use remitwatch_core::analytics::{
    AggOp, AggregateSpec, CalculatedField, Direction, Expr, Filter, Op, Query, Sort, SummarySpec, TimeRange,
};
use remitwatch_core::riskengine::{AlertRule, RiskScore, RuleParams};
use remitwatch_core::TxRecord;
use serde_json::{json, Value};

use crate::analytics as oracle;
use crate::fixtures::{at, random_records, random_scores, T0};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Labels with both classes present and scores on a grid; coarse grids
/// give ties, fine ones give distinct scores.
pub fn label_score_set(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<f64>) {
    let n = rng.random_range(2..=200);
    let p_pos = rng.random_range(0.05..0.95);
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(p_pos))).collect();
    y[0] = 1;
    y[1] = 0;
    let grid = [2u32, 5, 10, 1000][rng.random_range(0..4)];
    let s = (0..n)
        .map(|_| f64::from(rng.random_range(0..=grid)) / f64::from(grid))
        .collect();
    (y, s)
}

/// Two features split by the line `x0 - 0.5 x1 + 0.3 = 0`, with a margin.
pub fn separable(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let p: Vec<f64> = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let margin: f64 = p[0] - 0.5 * p[1] + 0.3;
        if margin.abs() < 0.2 {
            continue;
        }
        y.push(u8::from(margin > 0.0));
        x.push(p);
    }
    (x, y)
}

/// Two interleaved rings: no single split separates them.
pub fn rings(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    (0..n)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let inner = rng.random_bool(0.5);
            let r = if inner { 1.0 } else { 2.0 } + 0.3 * normal(rng);
            (vec![r * a.cos(), r * a.sin()], u8::from(inner))
        })
        .unzip()
}

/// 300 points around three centers 12 apart, sigma 0.5.
pub fn three_blobs(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let centers = [(0.0, 0.0), (12.0, 0.0), (0.0, 12.0)];
    (0..300)
        .map(|i| {
            let (cx, cy) = centers[i % 3];
            (vec![cx + 0.5 * normal(rng), cy + 0.5 * normal(rng)], i % 3)
        })
        .unzip()
}

pub fn ar1_series(rng: &mut ChaCha8Rng, phi: f64, n: usize) -> Vec<f64> {
    let mut s = vec![0.0];
    for _ in 1..n {
        let prev = *s.last().unwrap();
        s.push(phi * prev + normal(rng));
    }
    s
}

pub fn random_rule(rng: &mut ChaCha8Rng, i: usize) -> AlertRule {
    let window = [60, 600, 3600, 86_400][rng.random_range(0..4)];
    let params = match rng.random_range(0..5) {
        0 => RuleParams::AmountThreshold {
            min_amount_minor: rng.random_range(1..60_000_00),
        },
        1 => RuleParams::Velocity {
            max_tx: rng.random_range(0..6),
            window_seconds: window,
        },
        2 => RuleParams::Structuring {
            threshold_minor: 10_000_00,
            margin: [0.05, 0.1, 0.3, 0.5][rng.random_range(0..4)],
            min_count: rng.random_range(1..6),
            window_seconds: window,
        },
        3 => RuleParams::ScoreThreshold {
            min_score: f64::from(rng.random_range(0..=20u32)) / 20.0,
        },
        _ => RuleParams::Anomaly {
            min_anomaly_score: f64::from(rng.random_range(0..=40u32)) / 2.0,
        },
    };
    AlertRule {
        rule_id: format!("r{i}"),
        name: format!("rule {i}"),
        params,
        enabled: rng.random_bool(0.85),
        actions: vec![],
    }
}

pub const TEXT_FIELDS: &[&str] = &[
    "sender_id",
    "receiver_id",
    "currency",
    "destination_currency",
    "reason",
    "label",
    "corridor",
    "tier",
    "sender_name",
];
pub const INT_FIELDS: &[&str] = &["amount_minor", "fee_minor", "gas_fee_minor", "block_height"];
pub const REAL_FIELDS: &[&str] = &["probability", "anomaly_score"];
const GROUPABLE: &[&str] = &[
    "currency",
    "destination_currency",
    "reason",
    "label",
    "corridor",
    "tier",
    "sender_id",
    "probability",
];
const SPAN: i64 = 30 * 86_400;

/// An operand taken from the data so filters hit; a typed stand-in when
/// there is nothing to sample.
fn sample_value(
    rng: &mut ChaCha8Rng,
    records: &[TxRecord],
    scores: &BTreeMap<String, RiskScore>,
    field: &str,
) -> Value {
    for _ in 0..20 {
        let Some(r) = records.choose(rng) else { break };
        let v = oracle::value(r, scores, field);
        if v != oracle::V::Missing {
            return match v {
                oracle::V::T(t) if rng.random_bool(0.5) => json!(t),
                other => oracle::to_json(&other),
            };
        }
    }
    if REAL_FIELDS.contains(&field) {
        json!(0.5)
    } else if INT_FIELDS.contains(&field) || field == "timestamp" {
        json!(T0)
    } else {
        json!("low")
    }
}

pub fn random_filter(rng: &mut ChaCha8Rng, records: &[TxRecord], scores: &BTreeMap<String, RiskScore>) -> Filter {
    let kind = rng.random_range(0..4);
    let field = match kind {
        0 => *TEXT_FIELDS.choose(rng).unwrap(),
        1 => *INT_FIELDS.choose(rng).unwrap(),
        2 => *REAL_FIELDS.choose(rng).unwrap(),
        _ => "timestamp",
    };
    let op = if kind == 0 {
        *[Op::Eq, Op::Ne, Op::Contains, Op::In].choose(rng).unwrap()
    } else {
        *[Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge, Op::In]
            .choose(rng)
            .unwrap()
    };
    let value = match op {
        Op::In => Value::Array(
            (0..rng.random_range(1..4))
                .map(|_| sample_value(rng, records, scores, field))
                .collect(),
        ),
        Op::Contains => {
            let s = sample_value(rng, records, scores, field);
            let s = s.as_str().unwrap();
            let a = rng.random_range(0..=s.len());
            let b = rng.random_range(a..=s.len());
            json!(s.get(a..b).unwrap_or(""))
        }
        _ => sample_value(rng, records, scores, field),
    };
    Filter {
        field: field.into(),
        op,
        value,
    }
}

pub fn random_range(rng: &mut ChaCha8Rng) -> TimeRange {
    let mut end = || rng.random_bool(0.4).then(|| at(T0 + rng.random_range(0..SPAN)));
    TimeRange { from: end(), to: end() }
}

/// Up to 200 records over a month with partial score coverage.
pub fn analytics_data(rng: &mut ChaCha8Rng) -> (Vec<TxRecord>, BTreeMap<String, RiskScore>) {
    let n = rng.random_range(0..=200);
    let senders = rng.random_range(1..30);
    let shuffle = rng.random_bool(0.5);
    let records = random_records(rng, n, senders, SPAN, shuffle);
    let coverage = *[0.0, 0.5, 1.0].choose(rng).unwrap();
    let scores = random_scores(rng, &records, coverage);
    (records, scores)
}

pub fn random_query(rng: &mut ChaCha8Rng, records: &[TxRecord], scores: &BTreeMap<String, RiskScore>) -> Query {
    let fields: Vec<&str> = TEXT_FIELDS
        .iter()
        .chain(INT_FIELDS)
        .chain(REAL_FIELDS)
        .copied()
        .chain(["timestamp"])
        .collect();
    Query {
        filters: (0..rng.random_range(0..3))
            .map(|_| random_filter(rng, records, scores))
            .collect(),
        time_range: random_range(rng),
        sort: Sort {
            field: fields.choose(rng).unwrap().to_string(),
            direction: if rng.random_bool(0.5) {
                Direction::Asc
            } else {
                Direction::Desc
            },
        },
        limit: rng.random_range(0..60),
        offset: rng.random_range(0..40),
    }
}

fn random_expr(rng: &mut ChaCha8Rng, cols: &[String], depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.4) {
        return if rng.random_bool(0.8) {
            Expr::Col(cols.choose(rng).unwrap().clone())
        } else {
            Expr::Const(f64::from(rng.random_range(0..5u32)))
        };
    }
    let a = Box::new(random_expr(rng, cols, depth - 1));
    let b = Box::new(random_expr(rng, cols, depth - 1));
    match rng.random_range(0..4) {
        0 => Expr::Add(a, b),
        1 => Expr::Sub(a, b),
        2 => Expr::Mul(a, b),
        _ => Expr::Div(a, b),
    }
}

fn random_aggregate(rng: &mut ChaCha8Rng) -> AggregateSpec {
    let numeric: Vec<&str> = INT_FIELDS.iter().chain(REAL_FIELDS).copied().collect();
    let ordered: Vec<&str> = numeric.iter().copied().chain(["timestamp"]).collect();
    match rng.random_range(0..6) {
        0 => AggregateSpec::new(AggOp::Count, None),
        1 => AggregateSpec::new(AggOp::Count, Some(REAL_FIELDS.choose(rng).unwrap())),
        2 => AggregateSpec::new(AggOp::Sum, Some(numeric.choose(rng).unwrap())),
        3 => AggregateSpec::new(AggOp::Mean, Some(numeric.choose(rng).unwrap())),
        4 => AggregateSpec::new(AggOp::Min, Some(ordered.choose(rng).unwrap())),
        _ => AggregateSpec::new(AggOp::Max, Some(ordered.choose(rng).unwrap())),
    }
}

pub fn random_summary_spec(
    rng: &mut ChaCha8Rng,
    records: &[TxRecord],
    scores: &BTreeMap<String, RiskScore>,
) -> SummarySpec {
    let mut aggregates: Vec<AggregateSpec> = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        let a = random_aggregate(rng);
        if !aggregates.iter().any(|b| b.column() == a.column()) {
            aggregates.push(a);
        }
    }
    let mut cols: Vec<String> = aggregates.iter().map(AggregateSpec::column).collect();
    cols.push("count".into());
    let calculated: Vec<CalculatedField> = (0..rng.random_range(0..3))
        .map(|i| {
            let expr = random_expr(rng, &cols, 2);
            let name = format!("calc{i}");
            cols.push(name.clone());
            CalculatedField { name, expr }
        })
        .collect();
    let n_groups = rng.random_range(0..3);
    SummarySpec {
        filters: (0..rng.random_range(0..2))
            .map(|_| random_filter(rng, records, scores))
            .collect(),
        time_range: random_range(rng),
        group_by: GROUPABLE
            .choose_multiple(rng, n_groups)
            .map(|s| s.to_string())
            .collect(),
        aggregates,
        calculated,
    }
}

/// A series for descriptive statistics: small integers, wide reals, or a
/// constant, by `case % 3`.
pub fn stats_series(rng: &mut ChaCha8Rng, case: usize) -> Vec<f64> {
    let n = rng.random_range(1..=200);
    match case % 3 {
        0 => (0..n).map(|_| f64::from(rng.random_range(0..50u32))).collect(),
        1 => (0..n).map(|_| rng.random_range(-1e6..1e6)).collect(),
        _ => vec![f64::from(rng.random_range(0..9u32)) * 0.1; n],
    }
}

/// Integer points for trend fitting: a daily count series, scattered
/// points, an exact line, or a flat series on few abscissae, by `case % 4`.
pub fn trend_points(rng: &mut ChaCha8Rng, case: usize) -> Vec<(i64, i64)> {
    let n = rng.random_range(1..=200);
    match case % 4 {
        0 => (0..n as i64).map(|t| (t, rng.random_range(0..500))).collect(),
        1 => (0..n)
            .map(|_| (rng.random_range(-50..50), rng.random_range(-1_000_000..1_000_000)))
            .collect(),
        2 => (0..n as i64).map(|t| (t, 3 * t - 7)).collect(),
        _ => (0..n).map(|_| (rng.random_range(0..3), 42)).collect(),
    }
}
