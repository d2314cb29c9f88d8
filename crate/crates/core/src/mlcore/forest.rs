use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, FeatureSampler, Presorted, RegressionTree, TreeConfig};
use super::{check_labels, check_row, Classifier, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub n_trees: usize,
    pub seed: u64,
    pub n_features: usize,
}

/// Bagged trees. Each tree sees a bootstrap sample (multiplicities become
/// row weights) and draws ⌈√d⌉ candidate features at every split.
pub fn train_forest(x: &[Vec<f64>], y: &[u8], cfg: &ForestConfig) -> Result<ForestModel, MlError> {
    if cfg.n_trees == 0 {
        return Err(MlError::InvalidConfig("n_trees must be >= 1".into()));
    }
    let d = check_labels(x, y)?;
    let n = x.len();
    let mtry = (d as f64).sqrt().ceil() as usize;
    let presorted = Presorted::new(x, d);
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        min_gain: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut h = vec![0.0; n];
    let mut g = vec![0.0; n];
    for _ in 0..cfg.n_trees {
        h.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n {
            h[rng.random_range(0..n)] += 1.0;
        }
        for i in 0..n {
            g[i] = if y[i] != 0 { h[i] } else { 0.0 };
        }
        let sampler = FeatureSampler { mtry, rng: &mut rng };
        trees.push(grow(x, d, &presorted, &g, &h, &tree_cfg, Some(sampler)).tree);
    }
    Ok(ForestModel {
        trees,
        n_trees: cfg.n_trees,
        seed: cfg.seed,
        n_features: d,
    })
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, MlError> {
        check_row(x, self.n_features)?;
        let sum: f64 = self.trees.iter().map(|t| t.eval(x)).sum();
        Ok((sum / self.trees.len() as f64).clamp(0.0, 1.0))
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError> {
        self.predict(x)
    }
}
