//! Data processing: validation of raw export lines, behavioural feature
//! extraction, temporal train/test splitting and z-normalization.

pub mod features;
pub mod matrix;
pub mod normalize;
pub mod split;
pub mod validate;

pub use features::{
    extract_features, featurize, schema_hash, CorridorTable, Extracted, FeatureError, FeatureVector, FeatureWarning,
    LabeledVector, FEATURE_NAMES, N_FEATURES,
};
pub use matrix::write_feature_matrix;
pub use normalize::{apply_normalizer, fit_normalizer, NormalizerStats};
pub use split::{temporal_split, DatasetSplit, Split, SplitError, Timestamped};
pub use validate::{load_dataset, validate, CleanRecord, LoadedDataset, ValidationError, ValidationWarning};
