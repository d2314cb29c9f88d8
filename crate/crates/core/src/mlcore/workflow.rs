//! Dataset-to-artifact training and evaluation shared by the CLI and the service.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::anomaly::{anomaly_fit, AnomalyStats};
use super::ar::fit_ar;
use super::artifact::{ArtifactMeta, Model, ModelArtifact, ModelType, Preprocessing};
use super::forest::{train_forest, ForestConfig};
use super::gbm::{train_gbm, GbmConfig};
use super::kmeans::{kmeans_fit, KMeansConfig};
use super::logistic::{train_logistic, LogisticConfig};
use super::metrics::{classification_report, regression_metrics, MetricsReport};
use super::MlError;
use crate::digest::sha256_hex;
use crate::pipeline::features::{featurize, CorridorTable, LabeledVector, BINARY_FEATURES};
use crate::pipeline::normalize::{fit_normalizer, NormalizerStats};
use crate::pipeline::split::{temporal_split, SplitError};
use crate::record::{format_timestamp, from_epoch_seconds, TxRecord};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("bad hyperparameters: {0}")]
    Config(String),
    #[error("{0} artifacts cannot score transactions")]
    NotAClassifier(ModelType),
}

/// Featurized, temporally split data with preprocessing fitted on the train side.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<LabeledVector>,
    pub test: Vec<LabeledVector>,
    pub split_timestamp: i64,
    pub normalizer: NormalizerStats,
    pub anomaly: AnomalyStats,
    pub corridors: CorridorTable,
}

fn matrix(rows: &[LabeledVector], normalizer: &NormalizerStats) -> (Vec<Vec<f64>>, Vec<u8>) {
    rows.iter()
        .map(|r| (normalizer.apply(&r.features).0.to_vec(), r.label))
        .unzip()
}

impl Prepared {
    pub fn train_matrix(&self) -> (Vec<Vec<f64>>, Vec<u8>) {
        matrix(&self.train, &self.normalizer)
    }

    pub fn test_matrix(&self) -> (Vec<Vec<f64>>, Vec<u8>) {
        matrix(&self.test, &self.normalizer)
    }

    pub fn preprocessing(&self) -> Preprocessing {
        Preprocessing {
            normalizer: Some(self.normalizer.clone()),
            corridors: Some(self.corridors.clone()),
            anomaly: Some(self.anomaly.clone()),
        }
    }
}

pub fn prepare(records: &[TxRecord], corridors: &CorridorTable, test_fraction: f64) -> Result<Prepared, WorkflowError> {
    let vectors = featurize(records, corridors);
    let split = temporal_split(vectors, test_fraction)?;
    let train_features: Vec<_> = split.train.iter().map(|r| r.features).collect();
    let normalizer = fit_normalizer(&train_features)?;
    let raw: Vec<Vec<f64>> = train_features.iter().map(|f| f.0.to_vec()).collect();
    // binary indicators have zero MAD and would dominate every score
    let anomaly = anomaly_fit(&raw)?.ignoring(&BINARY_FEATURES);
    Ok(Prepared {
        train: split.train,
        test: split.test,
        split_timestamp: split.split_timestamp,
        normalizer,
        anomaly,
        corridors: corridors.clone(),
    })
}

/// Order-sensitive digest over the transaction hashes of a dataset.
pub fn dataset_digest(records: &[TxRecord]) -> String {
    let joined: Vec<&str> = records.iter().map(|r| r.tx_hash.as_str()).collect();
    sha256_hex(joined.join("\n").as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        let c = KMeansConfig::default();
        Self {
            k: 4,
            max_iters: c.max_iters,
            tol: c.tol,
            seed: c.seed,
        }
    }
}

/// AR on transaction counts bucketed by `bucket_seconds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArParams {
    pub p: usize,
    pub d: usize,
    pub bucket_seconds: i64,
}

impl Default for ArParams {
    fn default() -> Self {
        Self {
            p: 3,
            d: 0,
            bucket_seconds: 3600,
        }
    }
}

fn parse<T: DeserializeOwned + Serialize>(v: &Value) -> Result<(T, Value), WorkflowError> {
    let v = if v.is_null() {
        Value::Object(Default::default())
    } else {
        v.clone()
    };
    let cfg: T = serde_json::from_value(v).map_err(|e| WorkflowError::Config(e.to_string()))?;
    let resolved = serde_json::to_value(&cfg).expect("configs serialize");
    Ok((cfg, resolved))
}

/// Per-bucket transaction counts from the first to the last timestamp.
pub fn bucket_counts(timestamps: &[i64], bucket_seconds: i64) -> Vec<f64> {
    let (Some(lo), Some(hi)) = (timestamps.iter().min(), timestamps.iter().max()) else {
        return Vec::new();
    };
    let first = lo.div_euclid(bucket_seconds);
    let n = (hi.div_euclid(bucket_seconds) - first + 1) as usize;
    let mut out = vec![0.0; n];
    for t in timestamps {
        out[(t.div_euclid(bucket_seconds) - first) as usize] += 1.0;
    }
    out
}

/// Checks hyperparameters without touching any data.
pub fn check_hyperparameters(model_type: ModelType, hyperparameters: &Value) -> Result<Value, WorkflowError> {
    Ok(match model_type {
        ModelType::Logistic => parse::<LogisticConfig>(hyperparameters)?.1,
        ModelType::Gbm => parse::<GbmConfig>(hyperparameters)?.1,
        ModelType::Forest => parse::<ForestConfig>(hyperparameters)?.1,
        ModelType::Kmeans => parse::<KMeansParams>(hyperparameters)?.1,
        ModelType::Ar => parse::<ArParams>(hyperparameters)?.1,
    })
}

/// Trains one model on the earlier 80% of `records` and evaluates it on the rest.
pub fn train_model(
    records: &[TxRecord],
    corridors: &CorridorTable,
    model_type: ModelType,
    hyperparameters: &Value,
) -> Result<ModelArtifact, WorkflowError> {
    check_hyperparameters(model_type, hyperparameters)?;
    let prep = prepare(records, corridors, DEFAULT_TEST_FRACTION)?;
    let (x, y) = prep.train_matrix();
    let (xt, yt) = prep.test_matrix();
    let (model, resolved, seed, metrics) = match model_type {
        ModelType::Logistic => {
            let (cfg, resolved) = parse::<LogisticConfig>(hyperparameters)?;
            let m = Model::Logistic(train_logistic(&x, &y, &cfg)?);
            let metrics = held_out(&m, &xt, &yt)?;
            (m, resolved, cfg.seed, metrics)
        }
        ModelType::Gbm => {
            let (cfg, resolved) = parse::<GbmConfig>(hyperparameters)?;
            let m = Model::Gbm(train_gbm(&x, &y, &cfg)?);
            let metrics = held_out(&m, &xt, &yt)?;
            (m, resolved, cfg.seed, metrics)
        }
        ModelType::Forest => {
            let (cfg, resolved) = parse::<ForestConfig>(hyperparameters)?;
            let m = Model::Forest(train_forest(&x, &y, &cfg)?);
            let metrics = held_out(&m, &xt, &yt)?;
            (m, resolved, cfg.seed, metrics)
        }
        ModelType::Kmeans => {
            let (p, resolved) = parse::<KMeansParams>(hyperparameters)?;
            let cfg = KMeansConfig {
                max_iters: p.max_iters,
                tol: p.tol,
                seed: p.seed,
            };
            let c = kmeans_fit(&x, p.k, &cfg)?;
            let inertia = xt
                .iter()
                .map(|r| {
                    let i = c.assign(r)?;
                    Ok(c.centroids[i].iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                })
                .sum::<Result<f64, MlError>>()?;
            let metrics = MetricsReport {
                n: xt.len(),
                classification: None,
                regression: None,
                inertia: Some(inertia),
            };
            (Model::Kmeans(c), resolved, p.seed, metrics)
        }
        ModelType::Ar => {
            let (p, resolved) = parse::<ArParams>(hyperparameters)?;
            if p.bucket_seconds <= 0 {
                return Err(WorkflowError::Config("bucket_seconds must be > 0".into()));
            }
            let all: Vec<i64> = prep.train.iter().chain(&prep.test).map(|r| r.timestamp).collect();
            let series = bucket_counts(&all, p.bucket_seconds);
            let first_bucket = all.iter().min().copied().unwrap_or(0).div_euclid(p.bucket_seconds);
            let cut = ((prep.split_timestamp.div_euclid(p.bucket_seconds) - first_bucket) as usize).min(series.len());
            let m = fit_ar(&series[..cut], p.p, p.d)?;
            let horizon = series.len() - cut;
            let forecast = m.forecast(&series[..cut], horizon)?;
            let regression = if horizon > 0 {
                Some(regression_metrics(&series[cut..], &forecast)?)
            } else {
                None
            };
            let metrics = MetricsReport {
                n: horizon,
                classification: None,
                regression,
                inertia: None,
            };
            (Model::Ar(m), resolved, 0, metrics)
        }
    };
    let last_train = prep.train.iter().map(|r| r.timestamp).max().unwrap_or(0);
    let meta = ArtifactMeta {
        seed,
        timestamp: format_timestamp(&from_epoch_seconds(last_train)),
        dataset_digest: dataset_digest(records),
        n_train: prep.train.len(),
        n_test: prep.test.len(),
        split_timestamp: Some(prep.split_timestamp),
    };
    let mut artifact = ModelArtifact::new(model, resolved, prep.preprocessing(), meta);
    artifact.metrics = Some(metrics);
    Ok(artifact)
}

fn held_out(model: &Model, x: &[Vec<f64>], y: &[u8]) -> Result<MetricsReport, WorkflowError> {
    let c = model
        .classifier()
        .ok_or(WorkflowError::NotAClassifier(model.model_type()))?;
    let scores = c.predict_many(x)?;
    Ok(classification_report(y, &scores, DEFAULT_THRESHOLD)?)
}

/// Scores every record of a dataset with a classifier artifact.
pub fn score_dataset(
    artifact: &ModelArtifact,
    records: &[TxRecord],
) -> Result<Vec<(LabeledVector, f64)>, WorkflowError> {
    let c = artifact
        .classifier()
        .ok_or(WorkflowError::NotAClassifier(artifact.model_type()))?;
    let corridors = artifact.preprocessing.corridors.clone().unwrap_or_default();
    featurize(records, &corridors)
        .into_iter()
        .map(|row| {
            let p = c.predict_proba(&artifact.preprocessing.model_input(&row.features))?;
            Ok((row, p))
        })
        .collect()
}

/// Evaluates a classifier artifact on every record of a dataset.
pub fn evaluate(
    artifact: &ModelArtifact,
    records: &[TxRecord],
    threshold: f64,
) -> Result<MetricsReport, WorkflowError> {
    let scored = score_dataset(artifact, records)?;
    let (y, s): (Vec<u8>, Vec<f64>) = scored.iter().map(|(r, p)| (r.label, *p)).unzip();
    Ok(classification_report(&y, &s, threshold)?)
}
