//! Classification and regression metrics.
//!
//! Conventions: precision/recall fall back to 0 with a degenerate flag when
//! their denominator is zero; ROC-AUC is the Mann-Whitney statistic with
//! ties worth one half; PR-AUC is average precision over distinct score
//! thresholds (no interpolation).

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

pub fn classification_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<ClassificationMetrics, MlError> {
    if y_true.len() != y_pred.len() {
        return Err(MlError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MlError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t != 0, p != 0) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    let n = cm.total() as f64;
    let accuracy = (cm.tp + cm.tn) as f64 / n;
    let (precision, precision_degenerate) = match cm.tp + cm.fp {
        0 => (0.0, true),
        d => (cm.tp as f64 / d as f64, false),
    };
    let (recall, recall_degenerate) = match cm.tp + cm.fn_ {
        0 => (0.0, true),
        d => (cm.tp as f64 / d as f64, false),
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassificationMetrics {
        confusion: cm,
        accuracy,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
    })
}

/// Positive when `score >= threshold`.
pub fn threshold_predictions(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|s| u8::from(*s >= threshold)).collect()
}

fn check_scored(y_true: &[u8], scores: &[f64]) -> Result<(usize, usize), MlError> {
    if y_true.len() != scores.len() {
        return Err(MlError::LengthMismatch {
            left: y_true.len(),
            right: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    let pos = y_true.iter().filter(|y| **y != 0).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MlError::SingleClassInput);
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64, MlError> {
    let (pos, neg) = check_scored(y_true, scores)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    // sum of midranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let positives = idx[i..=j].iter().filter(|k| y_true[**k] != 0).count();
        rank_sum += midrank * positives as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: sum over distinct thresholds (descending) of
/// precision × recall increment.
pub fn pr_auc(y_true: &[u8], scores: &[f64]) -> Result<f64, MlError> {
    let (pos, _) = check_scored(y_true, scores)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            tp += usize::from(y_true[idx[i]] != 0);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Percent. Absent when any true value is zero.
    pub mape: Option<f64>,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics, MlError> {
    if y_true.len() != y_pred.len() {
        return Err(MlError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MlError::EmptyInput);
    }
    let n = y_true.len() as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut ape = 0.0;
    let mut mape_defined = true;
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = p - t;
        se += e * e;
        ae += e.abs();
        if *t == 0.0 {
            mape_defined = false;
        } else {
            ape += (e / t).abs();
        }
    }
    let mse = se / n;
    Ok(RegressionMetrics {
        mse,
        rmse: mse.sqrt(),
        mae: ae / n,
        mape: mape_defined.then(|| 100.0 * ape / n),
    })
}

/// Held-out classification quality at one decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    /// Set when the labels hold a single class, so both AUCs are reported as 0.
    pub auc_degenerate: bool,
}

/// What a trained model reports about held-out data. Classifiers fill the
/// flattened classification block, forecasters the regression block and
/// clusterings the inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    #[serde(flatten)]
    pub classification: Option<ClassificationReport>,
    #[serde(default)]
    pub regression: Option<RegressionMetrics>,
    #[serde(default)]
    pub inertia: Option<f64>,
}

pub fn classification_report(y_true: &[u8], scores: &[f64], threshold: f64) -> Result<MetricsReport, MlError> {
    let preds = threshold_predictions(scores, threshold);
    let m = classification_metrics(y_true, &preds)?;
    let (roc, pr, auc_degenerate) = match (roc_auc(y_true, scores), pr_auc(y_true, scores)) {
        (Ok(r), Ok(p)) => (r, p, false),
        (Err(MlError::SingleClassInput), _) => (0.0, 0.0, true),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(MetricsReport {
        n: y_true.len(),
        classification: Some(ClassificationReport {
            threshold,
            confusion: m.confusion,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            roc_auc: roc,
            pr_auc: pr,
            precision_degenerate: m.precision_degenerate,
            recall_degenerate: m.recall_degenerate,
            auc_degenerate,
        }),
        regression: None,
        inertia: None,
    })
}
