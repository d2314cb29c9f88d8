use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::LabeledVector;
use crate::record::TxRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("test_fraction must be in (0, 1), got {0}")]
    BadFraction(String),
    #[error("every record shares one timestamp; no temporal split exists")]
    NoDistinctTimestamps,
}

/// Anything that can be ordered in time, with a tie-breaking key.
pub trait Timestamped {
    fn timestamp(&self) -> i64;
    fn order_key(&self) -> &str;
}

impl Timestamped for LabeledVector {
    fn timestamp(&self) -> i64 {
        self.timestamp
    }
    fn order_key(&self) -> &str {
        &self.tx_hash
    }
}

impl Timestamped for TxRecord {
    fn timestamp(&self) -> i64 {
        self.epoch_seconds()
    }
    fn order_key(&self) -> &str {
        &self.tx_hash
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    /// Unix seconds; every train item is strictly earlier, every test item at or after.
    pub split_timestamp: i64,
}

pub type DatasetSplit = Split<LabeledVector>;

/// Holds out the latest `ceil(test_fraction * n)` items. Items sharing the
/// boundary timestamp all go to the test side so no timestamp straddles the split.
pub fn temporal_split<T: Timestamped>(mut items: Vec<T>, test_fraction: f64) -> Result<Split<T>, SplitError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::BadFraction(test_fraction.to_string()));
    }
    let n = items.len();
    if n < 2 {
        return Err(SplitError::TooFewRecords { needed: 2, got: n });
    }
    items.sort_by(|a, b| {
        a.timestamp()
            .cmp(&b.timestamp())
            .then_with(|| a.order_key().cmp(b.order_key()))
    });
    let n_test = ((test_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut cut = n - n_test;
    let split_timestamp = items[cut].timestamp();
    while cut > 0 && items[cut - 1].timestamp() == split_timestamp {
        cut -= 1;
    }
    if cut == 0 {
        return Err(SplitError::NoDistinctTimestamps);
    }
    let test = items.split_off(cut);
    Ok(Split {
        train: items,
        test,
        split_timestamp,
    })
}
