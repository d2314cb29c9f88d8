#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Utc};
use http_body_util::BodyExt;
use remitwatch::runtime::Clock;
use remitwatch::{Service, ServiceConfig};
use remitwatch_core::chainsim::{export_dataset, ScenarioConfig, SimState};
use serde_json::Value;
use tower::ServiceExt;

pub mod goldens;

pub const NOW: &str = "2024-01-01T00:00:00Z";

pub fn fixed_clock() -> Clock {
    let t: DateTime<Utc> = NOW.parse().unwrap();
    Arc::new(move || t)
}

pub fn config(dir: &Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.to_path_buf(),
        heartbeat_seconds: 1,
        ..ServiceConfig::default()
    }
}

/// A service over `dir/events.jsonl` with a frozen clock and the default rules.
pub fn open(dir: &Path) -> Arc<Service> {
    let cfg = config(dir);
    let (svc, _) = Service::open_log(&cfg.log_path(), &cfg, fixed_clock()).unwrap();
    svc.seed(&ScenarioConfig::default()).unwrap();
    svc
}

pub fn export(cfg: ScenarioConfig, blocks: u64, out: &Path) -> usize {
    let mut sim = SimState::init_scenario(cfg).unwrap();
    sim.advance(blocks);
    export_dataset(&sim, std::fs::File::create(out).unwrap()).unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        content_type,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}
