//! Service configuration. Precedence: command-line flags, then
//! `REMITWATCH_*` environment variables, then the config file, then defaults.

use std::path::{Path, PathBuf};

use remitwatch_core::mlcore::ModelType;
use remitwatch_core::riskengine::TierThresholds;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDefaults {
    pub model_type: ModelType,
    pub hyperparameters: Value,
    /// Artifact to register and activate when the log has no model yet.
    pub artifact: Option<PathBuf>,
}

impl Default for ModelDefaults {
    fn default() -> Self {
        Self {
            model_type: ModelType::Gbm,
            hyperparameters: Value::Null,
            artifact: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Scenario file used for corridor risks and the default ruleset.
    pub scenario: Option<PathBuf>,
    pub model: ModelDefaults,
    pub heartbeat_seconds: u64,
    pub tiers: TierThresholds,
    /// fsync after every append instead of only flushing to the OS.
    pub fsync: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            scenario: None,
            model: ModelDefaults::default(),
            heartbeat_seconds: 15,
            tiers: TierThresholds::default(),
            fsync: false,
        }
    }
}

/// Values that came from flags or the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub listen: Option<String>,
    pub port: Option<u16>,
    pub data_dir: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub heartbeat_seconds: Option<u64>,
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }

    /// File (if any) with overrides applied on top, then validated.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(v) = &overrides.listen {
            cfg.listen = v.clone();
        }
        if let Some(v) = overrides.port {
            cfg.port = v;
        }
        if let Some(v) = &overrides.data_dir {
            cfg.data_dir = v.clone();
        }
        if let Some(v) = &overrides.scenario {
            cfg.scenario = Some(v.clone());
        }
        if let Some(v) = overrides.heartbeat_seconds {
            cfg.heartbeat_seconds = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::Invalid {
                field: "port",
                reason: "must be in 1..=65535".into(),
            });
        }
        if self.heartbeat_seconds == 0 {
            return Err(ConfigError::Invalid {
                field: "heartbeat_seconds",
                reason: "must be > 0".into(),
            });
        }
        self.tiers.validate().map_err(|e| ConfigError::Invalid {
            field: "tiers",
            reason: e.to_string(),
        })?;
        let probe = || -> std::io::Result<()> {
            std::fs::create_dir_all(&self.data_dir)?;
            let p = self.data_dir.join(".write-probe");
            std::fs::write(&p, b"")?;
            std::fs::remove_file(p)
        };
        probe().map_err(|e| ConfigError::Invalid {
            field: "data_dir",
            reason: format!("{} is not writable: {e}", self.data_dir.display()),
        })
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.jsonl")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("svc.json");
        let data = dir.path().join("d");
        std::fs::write(
            &file,
            serde_json::json!({"port": 9000, "listen": "0.0.0.0", "data_dir": data}).to_string(),
        )
        .unwrap();
        let cfg = ServiceConfig::resolve(Some(&file), &Overrides::default()).unwrap();
        assert_eq!((cfg.port, cfg.listen.as_str()), (9000, "0.0.0.0"));
        let o = Overrides {
            port: Some(9100),
            ..Overrides::default()
        };
        let cfg = ServiceConfig::resolve(Some(&file), &o).unwrap();
        assert_eq!((cfg.port, cfg.listen.as_str()), (9100, "0.0.0.0"));
    }

    #[test]
    fn bad_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides {
            port: Some(0),
            data_dir: Some(dir.path().into()),
            ..Overrides::default()
        };
        assert!(matches!(
            ServiceConfig::resolve(None, &o),
            Err(ConfigError::Invalid { field: "port", .. })
        ));
        let file = dir.path().join("svc.json");
        std::fs::write(&file, r#"{"prot": 1}"#).unwrap();
        assert!(matches!(
            ServiceConfig::from_file(&file),
            Err(ConfigError::Parse { .. })
        ));
    }
}
