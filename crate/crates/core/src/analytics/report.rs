use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::query::{matching, Filter, TimeRange, MAX_LIMIT};
use super::summary::{aggregate, AggOp, AggregateSpec, SummarySpec, SummaryTable};
use super::{field_type, field_value, AnalyticsError, FieldType, FieldValue, ScoreLookup};
use crate::record::{format_timestamp, TxRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Scatter,
    Pie,
    Line,
    Bar,
}

impl ChartKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChartKind::Scatter => "scatter",
            ChartKind::Pie => "pie",
            ChartKind::Line => "line",
            ChartKind::Bar => "bar",
        }
    }
}

/// Bindings by kind: pie and bar need `category`; line takes `x` (default
/// `timestamp`, bucketed by `bucket_seconds`); scatter needs numeric `x` and `y`.
/// `value` aggregates each category or bucket and defaults to a count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub kind: ChartKind,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<AggregateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket_seconds: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Section {
    Text {
        text: String,
    },
    Summary {
        #[serde(default)]
        title: String,
        spec: SummarySpec,
    },
    Chart {
        chart: ChartSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub title: String,
    /// Restricts every section.
    #[serde(default)]
    pub time_range: TimeRange,
    #[serde(default)]
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x: Value,
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<ChartPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RenderedSection {
    Text { text: String },
    Summary { title: String, table: SummaryTable },
    Chart { chart: ChartData },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub time_range: TimeRange,
    pub record_count: usize,
    pub sections: Vec<RenderedSection>,
}

fn section_name(i: usize, s: &Section) -> String {
    match s {
        Section::Text { .. } => format!("#{i} (text)"),
        Section::Summary { title, .. } => format!("#{i} (summary \"{title}\")"),
        Section::Chart { chart } => format!("#{i} ({} chart \"{}\")", chart.kind.as_str(), chart.title),
    }
}

fn numeric(field: &str) -> Result<FieldType, AnalyticsError> {
    let ty = field_type(field)?;
    if ty == FieldType::Text {
        return Err(AnalyticsError::TypeMismatch {
            field: field.into(),
            aggregate: "axis".into(),
        });
    }
    Ok(ty)
}

fn value_spec(chart: &ChartSpec) -> Result<AggregateSpec, AnalyticsError> {
    let v = chart
        .value
        .clone()
        .unwrap_or_else(|| AggregateSpec::new(AggOp::Count, None));
    SummarySpec {
        aggregates: vec![v.clone()],
        ..SummarySpec::default()
    }
    .validate()?;
    if let (AggOp::Min | AggOp::Max, Some(f)) = (v.op, &v.field) {
        if numeric(f)? == FieldType::Time {
            return Err(AnalyticsError::TypeMismatch {
                field: f.clone(),
                aggregate: v.op.as_str().into(),
            });
        }
    }
    Ok(v)
}

fn render_chart(
    records: &[TxRecord],
    scores: &dyn ScoreLookup,
    chart: &ChartSpec,
) -> Result<ChartData, AnalyticsError> {
    let invalid = |reason: &str| AnalyticsError::BadValue {
        field: String::new(),
        reason: reason.into(),
    };
    let hits = matching(records, scores, &chart.filters, &chart.time_range)?;
    let y_of = |v: &Value| v.as_f64();
    let (x_label, y_label, points) = match chart.kind {
        ChartKind::Pie | ChartKind::Bar => {
            let cat = chart
                .category
                .as_deref()
                .ok_or_else(|| invalid("`category` is required"))?;
            field_type(cat)?;
            let v = value_spec(chart)?;
            let groups = group_by(&hits, |r| field_value(r, scores, cat));
            let mut points: Vec<ChartPoint> = groups
                .iter()
                .map(|(k, rows)| ChartPoint {
                    x: k.to_json(),
                    y: y_of(&aggregate(&v, rows, scores)),
                    share: None,
                })
                .collect();
            if chart.kind == ChartKind::Pie {
                let total: f64 = points.iter().filter_map(|p| p.y).sum();
                if points.iter().any(|p| p.y.is_some_and(|y| y < 0.0)) {
                    return Err(invalid("pie values must be non-negative"));
                }
                for p in &mut points {
                    p.share = Some(if total > 0.0 { p.y.unwrap_or(0.0) / total } else { 0.0 });
                }
            }
            (cat.to_string(), v.column(), points)
        }
        ChartKind::Line => {
            let x = chart.x.as_deref().unwrap_or("timestamp");
            let ty = numeric(x)?;
            let v = value_spec(chart)?;
            let bucket = chart.bucket_seconds.unwrap_or(3600);
            if bucket <= 0 {
                return Err(invalid("`bucket_seconds` must be positive"));
            }
            let groups = group_by(&hits, |r| match field_value(r, scores, x) {
                FieldValue::Time(t) if ty == FieldType::Time => FieldValue::Time(t.div_euclid(bucket) * bucket),
                other => other,
            });
            let points = groups
                .iter()
                .map(|(k, rows)| ChartPoint {
                    x: k.to_json(),
                    y: y_of(&aggregate(&v, rows, scores)),
                    share: None,
                })
                .collect();
            (x.to_string(), v.column(), points)
        }
        ChartKind::Scatter => {
            let (Some(x), Some(y)) = (chart.x.as_deref(), chart.y.as_deref()) else {
                return Err(invalid("`x` and `y` are required"));
            };
            numeric(x)?;
            numeric(y)?;
            let mut rows = hits;
            rows.sort_by(|a, b| (a.timestamp, &a.tx_hash).cmp(&(b.timestamp, &b.tx_hash)));
            let points = rows
                .iter()
                .filter_map(|r| {
                    let yv = field_value(r, scores, y).as_f64()?;
                    let xv = field_value(r, scores, x);
                    (xv != FieldValue::Null).then(|| ChartPoint {
                        x: xv.to_json(),
                        y: Some(yv),
                        share: None,
                    })
                })
                .take(MAX_LIMIT)
                .collect();
            (x.to_string(), y.to_string(), points)
        }
    };
    Ok(ChartData {
        kind: chart.kind,
        title: chart.title.clone(),
        x_label,
        y_label,
        points,
    })
}

/// Groups in key order; missing keys form the last group.
fn group_by<'a>(rows: &[&'a TxRecord], key: impl Fn(&TxRecord) -> FieldValue) -> Vec<(FieldValue, Vec<&'a TxRecord>)> {
    let mut keyed: Vec<(FieldValue, &TxRecord)> = rows.iter().map(|r| (key(r), *r)).collect();
    keyed.sort_by(|a, b| a.0.cmp_total(&b.0));
    let mut out: Vec<(FieldValue, Vec<&TxRecord>)> = Vec::new();
    for (k, r) in keyed {
        match out.last_mut() {
            Some((last, rs)) if last.cmp_total(&k).is_eq() => rs.push(r),
            _ => out.push((k, vec![r])),
        }
    }
    out
}

/// Resolves every section against the same records. Pure in (spec, records, scores).
pub fn generate_report(
    records: &[TxRecord],
    scores: &dyn ScoreLookup,
    spec: &ReportSpec,
) -> Result<Report, AnalyticsError> {
    let in_range: Vec<TxRecord> = records
        .iter()
        .filter(|r| spec.time_range.contains(r.epoch_seconds()))
        .cloned()
        .collect();
    let sections = spec
        .sections
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let rendered = match s {
                Section::Text { text } => Ok(RenderedSection::Text { text: text.clone() }),
                Section::Summary { title, spec } => {
                    super::summary::summarize(&in_range, scores, spec).map(|table| RenderedSection::Summary {
                        title: title.clone(),
                        table,
                    })
                }
                Section::Chart { chart } => {
                    render_chart(&in_range, scores, chart).map(|c| RenderedSection::Chart { chart: c })
                }
            };
            rendered.map_err(|e| AnalyticsError::InvalidSpec {
                section: section_name(i, s),
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report {
        title: spec.title.clone(),
        time_range: spec.time_range,
        record_count: in_range.len(),
        sections,
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "(none)".to_string(),
        Value::String(s) => s.replace('|', "\\|"),
        other => other.to_string(),
    }
}

/// Whole numbers print without a trailing `.0`.
fn opt(y: Option<f64>) -> String {
    match y {
        None => String::new(),
        Some(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        Some(v) => Value::from(v).to_string(),
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Standalone Markdown with every table and chart series inlined.
    pub fn to_markdown(&self) -> String {
        let mut md = format!("# {}\n\n", self.title);
        let span = match (&self.time_range.from, &self.time_range.to) {
            (None, None) => "all time".to_string(),
            (Some(f), None) => format!("from {}", format_timestamp(f)),
            (None, Some(t)) => format!("before {}", format_timestamp(t)),
            (Some(f), Some(t)) => format!("{} to {}", format_timestamp(f), format_timestamp(t)),
        };
        let _ = writeln!(md, "Records: {} ({span})\n", self.record_count);
        for s in &self.sections {
            match s {
                RenderedSection::Text { text } => {
                    let _ = writeln!(md, "{text}\n");
                }
                RenderedSection::Summary { title, table } => {
                    if !title.is_empty() {
                        let _ = writeln!(md, "## {title}\n");
                    }
                    let mut head: Vec<String> = table.group_by.clone();
                    head.push("count".into());
                    head.extend(table.columns.iter().filter(|c| *c != "count").cloned());
                    let _ = writeln!(md, "| {} |", head.join(" | "));
                    let _ = writeln!(md, "|{}", " --- |".repeat(head.len()));
                    for row in &table.rows {
                        let mut cells: Vec<String> = row.key.iter().map(cell).collect();
                        cells.push(row.count.to_string());
                        cells.extend(
                            table
                                .columns
                                .iter()
                                .filter(|c| *c != "count")
                                .map(|c| row.values.get(c).filter(|v| !v.is_null()).map(cell).unwrap_or_default()),
                        );
                        let _ = writeln!(md, "| {} |", cells.join(" | "));
                    }
                    md.push('\n');
                }
                RenderedSection::Chart { chart } => {
                    let _ = writeln!(md, "## {} ({} chart)\n", chart.title, chart.kind.as_str());
                    let pie = chart.kind == ChartKind::Pie;
                    let _ = write!(md, "| {} | {} |", chart.x_label, chart.y_label);
                    md.push_str(if pie {
                        " share |\n| --- | --- | --- |\n"
                    } else {
                        "\n| --- | --- |\n"
                    });
                    for p in &chart.points {
                        let _ = write!(md, "| {} | {} |", cell(&p.x), opt(p.y));
                        if pie {
                            let _ = write!(md, " {} |", opt(p.share));
                        }
                        md.push('\n');
                    }
                    md.push('\n');
                }
            }
        }
        md
    }
}

/// Counts per category, used by tests and the dashboard.
pub fn category_counts(records: &[TxRecord], scores: &dyn ScoreLookup, field: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry(field_value(r, scores, field).label()).or_insert(0) += 1;
    }
    out
}
