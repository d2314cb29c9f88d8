//! Classification metrics by counting and exhaustive enumeration.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

pub fn count(y_true: &[u8], y_pred: &[u8]) -> Counts {
    let mut c = Counts::default();
    for i in 0..y_true.len() {
        let t = y_true[i] == 1;
        let p = y_pred[i] == 1;
        if t && p {
            c.tp += 1;
        } else if !t && p {
            c.fp += 1;
        } else if !t && !p {
            c.tn += 1;
        } else {
            c.fn_ += 1;
        }
    }
    c
}

/// (accuracy, precision, recall, f1) with 0 for an empty denominator.
pub fn rates(c: Counts) -> (f64, f64, f64, f64) {
    let n = (c.tp + c.fp + c.tn + c.fn_) as f64;
    let accuracy = (c.tp + c.tn) as f64 / n;
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (accuracy, precision, recall, f1)
}

/// Share of (positive, negative) pairs ordered correctly, ties counting half.
pub fn roc_auc_pairs(y_true: &[u8], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..y_true.len() {
        if y_true[i] != 1 {
            continue;
        }
        for j in 0..y_true.len() {
            if y_true[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Average precision: at every distinct score taken as a threshold, from
/// the highest down, precision weighted by the recall it adds.
pub fn average_precision(y_true: &[u8], scores: &[f64]) -> f64 {
    let positives = y_true.iter().filter(|y| **y == 1).count() as f64;
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let selected: Vec<usize> = (0..scores.len()).filter(|i| scores[*i] >= t).collect();
        let tp = selected.iter().filter(|i| y_true[**i] == 1).count() as f64;
        let recall = tp / positives;
        ap += (recall - prev_recall) * (tp / selected.len() as f64);
        prev_recall = recall;
    }
    ap
}
