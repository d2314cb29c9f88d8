use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, BINARY_FEATURES, N_FEATURES};
use super::split::SplitError;

pub const STD_FLOOR: f64 = 1e-9;

/// Per-feature z-scaling statistics fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_normalizer(train: &[FeatureVector]) -> Result<NormalizerStats, SplitError> {
    let n = train.len();
    if n < 2 {
        return Err(SplitError::TooFewRecords { needed: 2, got: n });
    }
    let mut mean = vec![0.0; N_FEATURES];
    let mut std = vec![0.0; N_FEATURES];
    for j in 0..N_FEATURES {
        // shifting by the first value keeps constant columns exactly constant
        let shift = train[0].0[j];
        let d_mean = train.iter().map(|v| v.0[j] - shift).sum::<f64>() / n as f64;
        let m = shift + d_mean;
        let var = train.iter().map(|v| (v.0[j] - m).powi(2)).sum::<f64>() / n as f64;
        mean[j] = m;
        std[j] = var.sqrt().max(STD_FLOOR);
    }
    Ok(NormalizerStats { mean, std })
}

impl NormalizerStats {
    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = v.0;
        for (j, x) in out.iter_mut().enumerate() {
            if !BINARY_FEATURES.contains(&j) {
                *x = (*x - self.mean[j]) / self.std[j];
            }
        }
        FeatureVector(out)
    }
}

pub fn apply_normalizer(stats: &NormalizerStats, v: &FeatureVector) -> FeatureVector {
    stats.apply(v)
}
