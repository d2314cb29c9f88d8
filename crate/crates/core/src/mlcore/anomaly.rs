use serde::{Deserialize, Serialize};

use super::{check_matrix, check_row, MlError};
use crate::pipeline::features::median;

/// Makes the MAD a consistent estimator of σ under normality.
pub const MAD_SCALE: f64 = 1.4826;
pub const MAD_FLOOR: f64 = 1e-9;
pub const DEFAULT_ANOMALY_THRESHOLD: f64 = 6.0;
pub const MIN_REFERENCE: usize = 10;

/// Robust per-feature location and scale over a reference window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyStats {
    pub median: Vec<f64>,
    pub mad: Vec<f64>,
    pub threshold: f64,
    /// Feature indices left out of the score, e.g. binary indicators whose MAD is 0.
    #[serde(default)]
    pub ignored: Vec<usize>,
}

pub fn anomaly_fit(reference: &[Vec<f64>]) -> Result<AnomalyStats, MlError> {
    if reference.len() < MIN_REFERENCE {
        return Err(MlError::TooFewRecords {
            needed: MIN_REFERENCE,
            got: reference.len(),
        });
    }
    let d = check_matrix(reference)?;
    let mut med = Vec::with_capacity(d);
    let mut mad = Vec::with_capacity(d);
    let mut col = Vec::with_capacity(reference.len());
    for f in 0..d {
        col.clear();
        col.extend(reference.iter().map(|r| r[f]));
        col.sort_by(f64::total_cmp);
        let m = median(&col);
        for v in col.iter_mut() {
            *v = (*v - m).abs();
        }
        col.sort_by(f64::total_cmp);
        mad.push(median(&col));
        med.push(m);
    }
    Ok(AnomalyStats {
        median: med,
        mad,
        threshold: DEFAULT_ANOMALY_THRESHOLD,
        ignored: Vec::new(),
    })
}

impl AnomalyStats {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn ignoring(mut self, features: &[usize]) -> Self {
        self.ignored = features.to_vec();
        self
    }

    /// Largest robust z-score over the scored features.
    pub fn score(&self, x: &[f64]) -> Result<f64, MlError> {
        check_row(x, self.median.len())?;
        Ok(x.iter()
            .zip(self.median.iter().zip(&self.mad))
            .enumerate()
            .filter(|(i, _)| !self.ignored.contains(i))
            .map(|(_, (v, (m, mad)))| (v - m).abs() / (MAD_SCALE * mad).max(MAD_FLOOR))
            .fold(0.0, f64::max))
    }

    pub fn is_anomalous(&self, x: &[f64]) -> Result<bool, MlError> {
        Ok(self.score(x)? > self.threshold)
    }
}
