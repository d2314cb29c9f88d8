//! From-scratch models and evaluation metrics.
//!
//! Rows are plain `&[Vec<f64>]`. Every trainer is deterministic given its
//! data, config and seed, and trained models are immutable values.

use thiserror::Error;

pub mod anomaly;
pub mod ar;
pub mod artifact;
pub mod forest;
pub mod gbm;
pub mod kmeans;
pub mod logistic;
pub mod metrics;
pub mod tree;
pub mod workflow;

pub use anomaly::{anomaly_fit, AnomalyStats, DEFAULT_ANOMALY_THRESHOLD};
pub use ar::{fit_ar, ArModel};
pub use artifact::{ArtifactMeta, Model, ModelArtifact, ModelType, Preprocessing};
pub use forest::{train_forest, ForestConfig, ForestModel};
pub use gbm::{log_loss, train_gbm, GbmConfig, GbmModel};
pub use kmeans::{adjusted_rand_index, kmeans_fit, Clustering, KMeansConfig};
pub use logistic::{loss_and_gradient, sigmoid, train_logistic, LogisticConfig, LogisticModel};
pub use metrics::{
    classification_metrics, classification_report, pr_auc, regression_metrics, roc_auc, threshold_predictions,
    ClassificationMetrics, ClassificationReport, ConfusionMatrix, MetricsReport, RegressionMetrics,
};
pub use tree::{train_tree, Node, RegressionTree, TreeConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("labels contain a single class")]
    SingleClassInput,
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("k = {k} exceeds the {n} available points")]
    KTooLarge { k: usize, n: usize },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("series of length {got} is too short; need {needed}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("lag design matrix is singular (collinear lags)")]
    SingularDesign,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub(crate) fn check_matrix(x: &[Vec<f64>]) -> Result<usize, MlError> {
    let d = x.first().ok_or(MlError::EmptyInput)?.len();
    for row in x {
        if row.len() != d {
            return Err(MlError::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MlError::NonFiniteInput);
        }
    }
    Ok(d)
}

pub(crate) fn check_labels(x: &[Vec<f64>], y: &[u8]) -> Result<usize, MlError> {
    if x.len() != y.len() {
        return Err(MlError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let d = check_matrix(x)?;
    let pos = y.iter().filter(|v| **v != 0).count();
    if pos == 0 || pos == y.len() {
        return Err(MlError::SingleClassInput);
    }
    Ok(d)
}

pub(crate) fn check_row(x: &[f64], expected: usize) -> Result<(), MlError> {
    if x.len() != expected {
        return Err(MlError::DimensionMismatch { expected, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    Ok(())
}

/// Probability-producing models share this surface.
pub trait Classifier {
    fn n_features(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError>;

    fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, MlError> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }
}
