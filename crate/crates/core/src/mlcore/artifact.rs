use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::anomaly::AnomalyStats;
use super::ar::ArModel;
use super::forest::ForestModel;
use super::gbm::GbmModel;
use super::kmeans::Clustering;
use super::logistic::LogisticModel;
use super::metrics::MetricsReport;
use super::Classifier;
use crate::pipeline::features::{schema_hash, CorridorTable, FeatureVector};
use crate::pipeline::normalize::NormalizerStats;

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Logistic,
    Gbm,
    Forest,
    Kmeans,
    Ar,
}

impl ModelType {
    pub const ALL: [ModelType; 5] = [Self::Logistic, Self::Gbm, Self::Forest, Self::Kmeans, Self::Ar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::Gbm => "gbm",
            Self::Forest => "forest",
            Self::Kmeans => "kmeans",
            Self::Ar => "ar",
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, Self::Logistic | Self::Gbm | Self::Forest)
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Logistic(LogisticModel),
    Gbm(GbmModel),
    Forest(ForestModel),
    Kmeans(Clustering),
    Ar(ArModel),
}

impl Model {
    pub fn model_type(&self) -> ModelType {
        match self {
            Model::Logistic(_) => ModelType::Logistic,
            Model::Gbm(_) => ModelType::Gbm,
            Model::Forest(_) => ModelType::Forest,
            Model::Kmeans(_) => ModelType::Kmeans,
            Model::Ar(_) => ModelType::Ar,
        }
    }

    pub fn classifier(&self) -> Option<&dyn Classifier> {
        match self {
            Model::Logistic(m) => Some(m),
            Model::Gbm(m) => Some(m),
            Model::Forest(m) => Some(m),
            Model::Kmeans(_) | Model::Ar(_) => None,
        }
    }

    fn to_value(&self) -> serde_json::Result<Value> {
        match self {
            Model::Logistic(m) => serde_json::to_value(m),
            Model::Gbm(m) => serde_json::to_value(m),
            Model::Forest(m) => serde_json::to_value(m),
            Model::Kmeans(m) => serde_json::to_value(m),
            Model::Ar(m) => serde_json::to_value(m),
        }
    }

    fn from_value(kind: ModelType, v: Value) -> serde_json::Result<Self> {
        Ok(match kind {
            ModelType::Logistic => Model::Logistic(serde_json::from_value(v)?),
            ModelType::Gbm => Model::Gbm(serde_json::from_value(v)?),
            ModelType::Forest => Model::Forest(serde_json::from_value(v)?),
            ModelType::Kmeans => Model::Kmeans(serde_json::from_value(v)?),
            ModelType::Ar => Model::Ar(serde_json::from_value(v)?),
        })
    }
}

/// Everything needed to turn a raw record into the model's input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub normalizer: Option<NormalizerStats>,
    pub corridors: Option<CorridorTable>,
    pub anomaly: Option<AnomalyStats>,
}

impl Preprocessing {
    /// Normalized model input for a raw feature vector.
    pub fn model_input(&self, v: &FeatureVector) -> Vec<f64> {
        match &self.normalizer {
            Some(n) => n.apply(v).0.to_vec(),
            None => v.0.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub seed: u64,
    /// Latest training-data timestamp (ISO-8601), so artifacts are reproducible.
    pub timestamp: String,
    pub dataset_digest: String,
    #[serde(default)]
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    #[serde(default)]
    pub split_timestamp: Option<i64>,
}

/// A trained model plus the metadata needed to reproduce and serve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArtifactWire", into = "ArtifactWire")]
pub struct ModelArtifact {
    pub model: Model,
    pub schema_version: u32,
    pub feature_schema_hash: String,
    pub hyperparameters: Value,
    pub preprocessing: Preprocessing,
    pub train_meta: ArtifactMeta,
    pub metrics: Option<MetricsReport>,
}

#[derive(Serialize, Deserialize)]
struct ArtifactWire {
    model_type: ModelType,
    schema_version: u32,
    feature_schema_hash: String,
    hyperparameters: Value,
    parameters: Value,
    #[serde(default)]
    preprocessing: Preprocessing,
    train_meta: ArtifactMeta,
    #[serde(default)]
    metrics: Option<MetricsReport>,
}

impl TryFrom<ArtifactWire> for ModelArtifact {
    type Error = String;

    fn try_from(w: ArtifactWire) -> Result<Self, Self::Error> {
        if w.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(format!("unsupported artifact schema_version {}", w.schema_version));
        }
        let model = Model::from_value(w.model_type, w.parameters)
            .map_err(|e| format!("bad {} parameters: {e}", w.model_type))?;
        Ok(ModelArtifact {
            model,
            schema_version: w.schema_version,
            feature_schema_hash: w.feature_schema_hash,
            hyperparameters: w.hyperparameters,
            preprocessing: w.preprocessing,
            train_meta: w.train_meta,
            metrics: w.metrics,
        })
    }
}

impl From<ModelArtifact> for ArtifactWire {
    fn from(a: ModelArtifact) -> Self {
        ArtifactWire {
            model_type: a.model.model_type(),
            schema_version: a.schema_version,
            feature_schema_hash: a.feature_schema_hash,
            hyperparameters: a.hyperparameters,
            parameters: a.model.to_value().expect("model parameters serialize"),
            preprocessing: a.preprocessing,
            train_meta: a.train_meta,
            metrics: a.metrics,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("artifact io: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("artifact was trained on feature schema {found}, expected {expected}")]
    SchemaMismatch { expected: String, found: String },
}

impl ModelArtifact {
    pub fn new(model: Model, hyperparameters: Value, preprocessing: Preprocessing, train_meta: ArtifactMeta) -> Self {
        ModelArtifact {
            model,
            schema_version: ARTIFACT_SCHEMA_VERSION,
            feature_schema_hash: schema_hash().to_string(),
            hyperparameters,
            preprocessing,
            train_meta,
            metrics: None,
        }
    }

    pub fn model_type(&self) -> ModelType {
        self.model.model_type()
    }

    pub fn classifier(&self) -> Option<&dyn Classifier> {
        self.model.classifier()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let a: ModelArtifact = serde_json::from_str(text)?;
        if a.model_type().is_classifier() && a.feature_schema_hash != schema_hash() {
            return Err(ArtifactError::SchemaMismatch {
                expected: schema_hash().to_string(),
                found: a.feature_schema_hash,
            });
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
