use serde::{Deserialize, Serialize};

use super::query::TimeRange;
use super::AnalyticsError;
use crate::record::TxRecord;

/// Quantiles interpolate linearly between order statistics: position (n-1)p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation; absent for a single observation.
    pub std: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn descriptive_stats(series: &[f64]) -> Result<DescriptiveStats, AnalyticsError> {
    if series.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    let n = series.len();
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = series.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| (series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt());
    Ok(DescriptiveStats {
        n,
        mean,
        median: quantile(&sorted, 0.5),
        std,
        min: sorted[0],
        max: sorted[n - 1],
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendLine {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Mean computed around the first element so constant inputs come back exact.
fn shifted_mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = xs.clone();
    let first = it.next().unwrap_or(0.0);
    let n = xs.clone().count() as f64;
    first + xs.map(|x| x - first).sum::<f64>() / n
}

/// Ordinary least squares. r² is 1 when both residual and total variance vanish.
pub fn trend_line(points: &[(f64, f64)]) -> Result<TrendLine, AnalyticsError> {
    if points.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    let mt = shifted_mean(points.iter().map(|p| p.0));
    let my = shifted_mean(points.iter().map(|p| p.1));
    let sxx: f64 = points.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    if sxx == 0.0 {
        return Err(AnalyticsError::DegenerateAbscissa);
    }
    let sxy: f64 = points.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let sst: f64 = points.iter().map(|(_, y)| (y - my) * (y - my)).sum();
    let ssr: f64 = points
        .iter()
        .map(|(t, y)| {
            let e = y - (intercept + slope * t);
            e * e
        })
        .sum();
    let r2 = if sst == 0.0 {
        if ssr == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ssr / sst
    };
    Ok(TrendLine { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrillDown {
    pub customer_id: String,
    pub time_range: TimeRange,
    /// Sent and received transactions, ordered by (timestamp, tx_hash).
    pub history: Vec<TxRecord>,
    pub amount_stats: Option<DescriptiveStats>,
    /// Seconds between consecutive transactions; needs two or more.
    pub interarrival_stats: Option<DescriptiveStats>,
}

pub fn drill_down(records: &[TxRecord], customer_id: &str, range: &TimeRange) -> Result<DrillDown, AnalyticsError> {
    let involved = |r: &TxRecord| r.sender_id == customer_id || r.receiver_id == customer_id;
    if !records.iter().any(involved) {
        return Err(AnalyticsError::UnknownCustomer(customer_id.to_string()));
    }
    let mut history: Vec<TxRecord> = records
        .iter()
        .filter(|r| involved(r) && range.contains(r.epoch_seconds()))
        .cloned()
        .collect();
    history.sort_by(|a, b| (a.timestamp, &a.tx_hash).cmp(&(b.timestamp, &b.tx_hash)));
    let amounts: Vec<f64> = history.iter().map(|r| r.amount_minor as f64).collect();
    let gaps: Vec<f64> = history
        .windows(2)
        .map(|w| (w[1].epoch_seconds() - w[0].epoch_seconds()) as f64)
        .collect();
    Ok(DrillDown {
        customer_id: customer_id.to_string(),
        time_range: *range,
        amount_stats: descriptive_stats(&amounts).ok(),
        interarrival_stats: descriptive_stats(&gaps).ok(),
        history,
    })
}
