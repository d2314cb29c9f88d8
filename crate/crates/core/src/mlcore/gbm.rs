use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{grow, Presorted, RegressionTree, TreeConfig};
use super::{check_labels, check_row, Classifier, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 20,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmTrainMeta {
    pub rounds: usize,
    pub seed: u64,
    /// Train log-loss after 0, 1, ..., `rounds` trees.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub feature_gain: BTreeMap<usize, f64>,
    pub n_features: usize,
    pub train_meta: GbmTrainMeta,
}

const P_CLAMP: f64 = 1e-15;

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn log_loss(y: &[u8], p: &[f64]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(p)
        .map(|(t, p)| {
            let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
            if *t != 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Log-loss computed from raw scores, stable for large margins.
fn margin_loss(y: &[u8], f: &[f64]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(f)
        .map(|(t, z)| {
            let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
            if *t != 0 {
                softplus - z
            } else {
                softplus
            }
        })
        .sum::<f64>()
        / n
}

pub fn train_gbm(x: &[Vec<f64>], y: &[u8], cfg: &GbmConfig) -> Result<GbmModel, MlError> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) {
        return Err(MlError::InvalidConfig("learning_rate must be in (0, 1]".into()));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(MlError::InvalidConfig("subsample must be in (0, 1]".into()));
    }
    let d = check_labels(x, y)?;
    let n = x.len();
    let pos = y.iter().filter(|v| **v != 0).count() as f64;
    let rate = pos / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        min_gain: 0.0,
    };
    let presorted = Presorted::new(x, d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut f = vec![base_score; n];
    let mut loss = margin_loss(y, &f);
    let mut history = vec![loss];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut feature_gain = BTreeMap::new();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let n_sub = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    for _ in 0..cfg.n_rounds {
        let in_round: Option<Vec<bool>> = (n_sub < n).then(|| {
            let mut m = vec![false; n];
            for i in sample(&mut rng, n, n_sub) {
                m[i] = true;
            }
            m
        });
        for i in 0..n {
            let p = sigmoid(f[i]);
            let t = f64::from(u8::from(y[i] != 0));
            let active = in_round.as_ref().is_none_or(|m| m[i]);
            // g holds hessian × Newton target, i.e. the residual itself
            h[i] = if active { (p * (1.0 - p)).max(1e-12) } else { 0.0 };
            g[i] = if active { t - p } else { 0.0 };
        }
        let grown = grow(x, d, &presorted, &g, &h, &tree_cfg, None);
        let mut tree = grown.tree;
        let step: Vec<f64> = x.iter().map(|row| tree.eval(row)).collect();
        // halve the step until the train loss does not rise; give up after 30 halvings
        let mut scale = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..30 {
            let cand: Vec<f64> = f.iter().zip(&step).map(|(fi, s)| fi + scale * s).collect();
            let cand_loss = margin_loss(y, &cand);
            if cand_loss <= loss {
                accepted = Some((cand, cand_loss));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, cand_loss)) => {
                // leaves carry the shrink factor beyond the nominal learning rate
                tree.scale_leaves(scale / cfg.learning_rate);
                f = cand;
                loss = cand_loss;
                for (feat, gain) in grown.gains {
                    *feature_gain.entry(feat).or_insert(0.0) += gain;
                }
            }
            None => tree.scale_leaves(0.0),
        }
        trees.push(tree);
        history.push(loss);
    }
    Ok(GbmModel {
        base_score,
        trees,
        learning_rate: cfg.learning_rate,
        feature_gain,
        n_features: d,
        train_meta: GbmTrainMeta {
            rounds: cfg.n_rounds,
            seed: cfg.seed,
            loss_history: history,
        },
    })
}

impl GbmModel {
    pub fn raw_score(&self, x: &[f64]) -> Result<f64, MlError> {
        check_row(x, self.n_features)?;
        Ok(self.base_score + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, MlError> {
        self.raw_score(x).map(sigmoid)
    }

    /// The model restricted to its first `k` trees.
    pub fn truncated(&self, k: usize) -> GbmModel {
        let mut m = self.clone();
        m.trees.truncate(k);
        m
    }
}

impl Classifier for GbmModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError> {
        self.predict(x)
    }
}
