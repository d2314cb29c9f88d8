//! The single writer: every mutation goes log first, then the store, then
//! the broadcast to stream clients.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use remitwatch_core::analytics::{annotate, MetadataAnnotation, Report, Target, WorkingSet};
use remitwatch_core::chainsim::{read_dataset, ScenarioConfig, SimState};
use remitwatch_core::digest::sha256_hex;
use remitwatch_core::mlcore::ModelArtifact;
use remitwatch_core::pipeline::features::CorridorTable;
use remitwatch_core::riskengine::{
    default_ruleset, score_transaction, Alert, AlertRule, AlertState, RiskError, RiskScore, RiskTier, Ruleset,
    TierThresholds,
};
use remitwatch_core::TxRecord;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

use crate::config::ServiceConfig;
use crate::event::{Event, EventPayload, ModelRegistration, RuleChange, Transition};
use crate::log::{EventLog, LogError, Recovery};
use crate::store::{ApplyError, Store};

const BROADCAST_CAPACITY: usize = 4096;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{message}")]
    Invalid { field: Option<String>, message: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError::Invalid {
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

/// Pace of a simulation or dataset replay relative to simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Speed {
    #[default]
    Max,
    Factor(f64),
}

impl std::str::FromStr for Speed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "max" {
            return Ok(Speed::Max);
        }
        match s.parse::<f64>() {
            Ok(f) if f.is_finite() && f > 0.0 => Ok(Speed::Factor(f)),
            _ => Err(format!("speed must be `max` or a positive number, got `{s}`")),
        }
    }
}

impl Serialize for Speed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Speed::Max => s.serialize_str("max"),
            Speed::Factor(f) => s.serialize_f64(*f),
        }
    }
}

impl<'de> Deserialize<'de> for Speed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(|f| f.to_string())
                .unwrap_or_default()
                .parse()
                .map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom("speed must be `max` or a positive number")),
        }
    }
}

impl Speed {
    /// Wall-clock pause for `simulated_seconds` of stream time.
    pub fn pause(&self, simulated_seconds: i64) -> Option<Duration> {
        match self {
            Speed::Max => None,
            Speed::Factor(f) if simulated_seconds > 0 => Some(Duration::from_secs_f64(simulated_seconds as f64 / f)),
            Speed::Factor(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub ingested: usize,
    pub duplicates: usize,
    pub scored: usize,
    pub alerts: usize,
}

impl IngestOutcome {
    fn add(&mut self, o: &IngestOutcome) {
        self.ingested += o.ingested;
        self.duplicates += o.duplicates;
        self.scored += o.scored;
        self.alerts += o.alerts;
    }
}

struct Writer {
    log: EventLog,
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub struct Service {
    writer: Mutex<Writer>,
    store: RwLock<Store>,
    events: RwLock<Vec<Arc<Event>>>,
    broadcast: broadcast::Sender<Arc<Event>>,
    thresholds: TierThresholds,
    corridors: RwLock<CorridorTable>,
    reports: RwLock<BTreeMap<String, Report>>,
    working_sets: RwLock<BTreeMap<String, WorkingSet>>,
    busy: AtomicBool,
    data_dir: PathBuf,
    heartbeat: Duration,
    clock: Clock,
}

fn lock_err<T>(_: T) -> ServiceError {
    ServiceError::Internal("a lock was poisoned by an earlier panic".into())
}

impl Service {
    /// Opens the log under `config.data_dir`, rebuilds the store, and seeds
    /// the default ruleset and configured model into an empty log.
    pub fn open(config: &ServiceConfig) -> Result<(Arc<Service>, Recovery), ServiceError> {
        let scenario = match &config.scenario {
            Some(p) => Some(load_scenario(p)?),
            None => None,
        };
        let scenario = scenario.unwrap_or_default();
        let (svc, recovery) = Service::open_log(&config.log_path(), config, Arc::new(Utc::now))?;
        svc.seed(&scenario)?;
        if svc.read().active_model().is_none() {
            if let Some(path) = &config.model.artifact {
                let artifact =
                    ModelArtifact::load(path).map_err(|e| ServiceError::invalid("model.artifact", e.to_string()))?;
                svc.register_model(artifact, true)?;
            }
        }
        Ok((svc, recovery))
    }

    /// Takes corridor risks from `scenario`; an empty log also gets the
    /// default ruleset for its reporting threshold.
    pub fn seed(&self, scenario: &ScenarioConfig) -> Result<(), ServiceError> {
        *self.corridors.write().map_err(lock_err)? = CorridorTable::from_corridors(&scenario.corridors);
        if self.seq() == 0 {
            for rule in default_ruleset(scenario.report_threshold).rules {
                self.upsert_rule(rule)?;
            }
        }
        Ok(())
    }

    /// Opens a specific log file with an explicit clock; nothing is seeded.
    pub fn open_log(
        path: &Path,
        config: &ServiceConfig,
        clock: Clock,
    ) -> Result<(Arc<Service>, Recovery), ServiceError> {
        let (log, events, recovery) = EventLog::open(path, config.fsync)?;
        let store = Store::replay(&events)?;
        let (broadcast, _) = broadcast::channel(BROADCAST_CAPACITY);
        let svc = Service {
            writer: Mutex::new(Writer { log }),
            store: RwLock::new(store),
            events: RwLock::new(events.into_iter().map(Arc::new).collect()),
            broadcast,
            thresholds: config.tiers,
            corridors: RwLock::new(CorridorTable::from_corridors(&ScenarioConfig::default().corridors)),
            reports: RwLock::new(BTreeMap::new()),
            working_sets: RwLock::new(BTreeMap::new()),
            busy: AtomicBool::new(false),
            data_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            heartbeat: Duration::from_secs(config.heartbeat_seconds),
            clock,
        };
        Ok((Arc::new(svc), recovery))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().expect("store lock poisoned")
    }

    pub fn seq(&self) -> u64 {
        self.read().seq()
    }

    pub fn heartbeat(&self) -> Duration {
        self.heartbeat
    }

    pub fn thresholds(&self) -> TierThresholds {
        self.thresholds
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<Event>> {
        self.broadcast.subscribe()
    }

    /// Logged events with `seq > after`, oldest first.
    pub fn events_after(&self, after: u64) -> Vec<Arc<Event>> {
        let events = self.events.read().expect("event lock poisoned");
        let start = (after as usize).min(events.len());
        events[start..].to_vec()
    }

    fn commit(&self, w: &mut Writer, payload: EventPayload) -> Result<Arc<Event>, ServiceError> {
        let ev = w.log.append(payload, self.now())?;
        self.store.write().map_err(lock_err)?.apply(&ev)?;
        let ev = Arc::new(ev);
        self.events.write().map_err(lock_err)?.push(ev.clone());
        // no receivers is fine
        let _ = self.broadcast.send(ev.clone());
        Ok(ev)
    }

    fn writer(&self) -> Result<std::sync::MutexGuard<'_, Writer>, ServiceError> {
        self.writer.lock().map_err(lock_err)
    }

    /// Scores one mined transaction, evaluates the rules, and logs
    /// tx_mined, tx_scored and any alert_fired events in that order.
    pub fn ingest(&self, record: TxRecord) -> Result<IngestOutcome, ServiceError> {
        let mut w = self.writer()?;
        self.ingest_locked(&mut w, record)
    }

    pub fn ingest_many(&self, records: impl IntoIterator<Item = TxRecord>) -> Result<IngestOutcome, ServiceError> {
        let mut w = self.writer()?;
        let mut total = IngestOutcome::default();
        for r in records {
            total.add(&self.ingest_locked(&mut w, r)?);
        }
        Ok(total)
    }

    fn ingest_locked(&self, w: &mut Writer, record: TxRecord) -> Result<IngestOutcome, ServiceError> {
        let (score, alerts) = {
            let store = self.read();
            if store.record(&record.tx_hash).is_some() {
                return Ok(IngestOutcome {
                    duplicates: 1,
                    ..IngestOutcome::default()
                });
            }
            let score = match store.active_model() {
                Some((id, artifact)) => {
                    let history = store.history().before(&record.sender_id, record.epoch_seconds());
                    Some(
                        score_transaction(&record, &history, id, artifact, None, &self.thresholds)
                            .map_err(|e| ServiceError::Internal(format!("scoring {}: {e}", record.tx_hash)))?,
                    )
                }
                None => None,
            };
            // without a model the score-based rules see a neutral score
            let neutral = RiskScore {
                tx_hash: record.tx_hash.clone(),
                model_id: String::new(),
                probability: 0.0,
                anomaly_score: 0.0,
                tier: RiskTier::Low,
            };
            let alerts = store.engine().evaluate(score.as_ref().unwrap_or(&neutral), &record);
            (score, alerts)
        };
        self.commit(w, EventPayload::TxMined(Box::new(record)))?;
        let scored = usize::from(score.is_some());
        if let Some(s) = score {
            self.commit(w, EventPayload::TxScored(s))?;
        }
        let n_alerts = alerts.len();
        for a in alerts {
            self.commit(w, EventPayload::AlertFired(Box::new(a)))?;
        }
        Ok(IngestOutcome {
            ingested: 1,
            duplicates: 0,
            scored,
            alerts: n_alerts,
        })
    }

    pub fn upsert_rule(&self, rule: AlertRule) -> Result<AlertRule, ServiceError> {
        let mut w = self.writer()?;
        let mut next = self.read().ruleset().clone();
        match next.rules.iter_mut().find(|r| r.rule_id == rule.rule_id) {
            Some(slot) => *slot = rule.clone(),
            None => next.rules.push(rule.clone()),
        }
        next.validate().map_err(|e| {
            // rule validation messages lead with the offending parameter
            let field = match &e {
                RiskError::InvalidRule { reason, .. } => match reason.split(' ').next() {
                    Some("rule_id") | Some("duplicate") => "rule_id".to_string(),
                    Some(p) if !p.is_empty() => format!("params.{p}"),
                    _ => "params".to_string(),
                },
                _ => "params".to_string(),
            };
            ServiceError::invalid(field, e.to_string())
        })?;
        self.commit(&mut w, EventPayload::RuleChanged(RuleChange::Upsert(rule.clone())))?;
        Ok(rule)
    }

    pub fn create_rule(&self, rule: AlertRule) -> Result<AlertRule, ServiceError> {
        if self.read().ruleset().get(&rule.rule_id).is_some() {
            return Err(ServiceError::Conflict(format!(
                "rule `{}` already exists",
                rule.rule_id
            )));
        }
        self.upsert_rule(rule)
    }

    pub fn delete_rule(&self, rule_id: &str) -> Result<(), ServiceError> {
        let mut w = self.writer()?;
        if self.read().ruleset().get(rule_id).is_none() {
            return Err(ServiceError::NotFound(format!("rule `{rule_id}`")));
        }
        self.commit(
            &mut w,
            EventPayload::RuleChanged(RuleChange::Delete(rule_id.to_string())),
        )?;
        Ok(())
    }

    pub fn ruleset(&self) -> Ruleset {
        self.read().ruleset().clone()
    }

    pub fn transition_alert(&self, alert_id: &str, to: AlertState, note: &str) -> Result<Alert, ServiceError> {
        let mut w = self.writer()?;
        let from = match self.read().alert(alert_id) {
            None => return Err(ServiceError::NotFound(format!("alert `{alert_id}`"))),
            Some(a) => a.state,
        };
        if !from.can_move_to(to) {
            return Err(ServiceError::Conflict(format!(
                "illegal alert transition {from} -> {to}"
            )));
        }
        self.commit(
            &mut w,
            EventPayload::AlertTransitioned(Transition {
                alert_id: alert_id.to_string(),
                from,
                to,
                note: note.to_string(),
                at: self.now(),
            }),
        )?;
        Ok(self.read().alert(alert_id).cloned().expect("just transitioned"))
    }

    /// Stores an artifact under a content-derived id.
    pub fn register_model(&self, artifact: ModelArtifact, activate: bool) -> Result<String, ServiceError> {
        if activate && artifact.classifier().is_none() {
            return Err(ServiceError::invalid(
                "model_type",
                format!("{} models cannot score transactions", artifact.model_type()),
            ));
        }
        let model_id = format!("M-{}", &sha256_hex(artifact.to_json())[..12]);
        let mut w = self.writer()?;
        let known = self.read().models().contains_key(&model_id);
        self.commit(
            &mut w,
            EventPayload::ModelRegistered(ModelRegistration {
                model_id: model_id.clone(),
                artifact: (!known).then(|| Box::new(artifact)),
                active: activate,
            }),
        )?;
        Ok(model_id)
    }

    pub fn activate_model(&self, model_id: &str) -> Result<(), ServiceError> {
        let mut w = self.writer()?;
        match self.read().models().get(model_id) {
            None => return Err(ServiceError::NotFound(format!("model `{model_id}`"))),
            Some(a) if a.classifier().is_none() => {
                return Err(ServiceError::Conflict(format!(
                    "{} models cannot score transactions",
                    a.model_type()
                )))
            }
            Some(_) => {}
        }
        self.commit(
            &mut w,
            EventPayload::ModelRegistered(ModelRegistration {
                model_id: model_id.to_string(),
                artifact: None,
                active: true,
            }),
        )?;
        Ok(())
    }

    pub fn annotate(
        &self,
        target: Target,
        key: &str,
        value: &str,
        author: &str,
    ) -> Result<MetadataAnnotation, ServiceError> {
        let mut w = self.writer()?;
        let a = {
            let store = self.read();
            annotate(|t| store.target_exists(t), target, key, value, author, self.now())
                .map_err(|e| ServiceError::NotFound(e.to_string()))?
        };
        self.commit(&mut w, EventPayload::AnnotationAdded(a.clone()))?;
        Ok(a)
    }

    pub fn corridors(&self) -> CorridorTable {
        self.corridors.read().expect("corridor lock poisoned").clone()
    }

    pub fn save_report(&self, report: Report) -> Result<String, ServiceError> {
        let json = report.to_json();
        let id = format!("R-{}", &sha256_hex(&json)[..12]);
        let dir = self.data_dir.join("reports");
        std::fs::create_dir_all(&dir).map_err(|e| ServiceError::Internal(e.to_string()))?;
        std::fs::write(dir.join(format!("{id}.json")), json).map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.reports.write().map_err(lock_err)?.insert(id.clone(), report);
        Ok(id)
    }

    pub fn report(&self, id: &str) -> Option<Report> {
        if let Some(r) = self.reports.read().ok()?.get(id) {
            return Some(r.clone());
        }
        // reports survive restarts on disk
        if !id.starts_with("R-") || !id[2..].bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        Report::load(&self.data_dir.join("reports").join(format!("{id}.json"))).ok()
    }

    pub fn save_working_set(&self, ws: WorkingSet) -> Result<(), ServiceError> {
        let mut sets = self.working_sets.write().map_err(lock_err)?;
        if sets.contains_key(ws.name()) {
            return Err(ServiceError::Conflict(format!("working set `{}` exists", ws.name())));
        }
        sets.insert(ws.name().to_string(), ws);
        Ok(())
    }

    pub fn working_set(&self, name: &str) -> Option<WorkingSet> {
        self.working_sets.read().ok()?.get(name).cloned()
    }

    fn claim(&self) -> Result<Job<'_>, ServiceError> {
        if self.busy.swap(true, Ordering::SeqCst) {
            return Err(ServiceError::Conflict(
                "a simulation or replay is already running".into(),
            ));
        }
        Ok(Job(&self.busy))
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::SeqCst)
    }

    /// Simulates `blocks` blocks, ingesting each block's transactions in
    /// chain order. Blocking; run it off the async runtime.
    pub fn run_scenario(
        &self,
        config: ScenarioConfig,
        blocks: u64,
        speed: Speed,
    ) -> Result<IngestOutcome, ServiceError> {
        let _job = self.claim()?;
        let mut sim =
            SimState::init_scenario(config.clone()).map_err(|e| ServiceError::invalid("config", e.to_string()))?;
        *self.corridors.write().map_err(lock_err)? = CorridorTable::from_corridors(&config.corridors);
        let mut total = IngestOutcome::default();
        for _ in 0..blocks {
            let before = sim.clock();
            let produced = sim.advance(1);
            if let Some(p) = speed.pause(sim.clock() - before) {
                std::thread::sleep(p);
            }
            let records: Vec<TxRecord> = produced
                .iter()
                .flat_map(|b| b.transactions.iter())
                .filter_map(|h| sim.transaction(h).and_then(|tx| sim.to_record(tx)))
                .collect();
            total.add(&self.ingest_many(records)?);
        }
        Ok(total)
    }

    /// Re-emits dataset records as a live stream paced by their timestamps.
    pub fn replay_records(&self, records: Vec<TxRecord>, speed: Speed) -> Result<ReplayStats, ServiceError> {
        let _job = self.claim()?;
        let started = Instant::now();
        let mut total = IngestOutcome::default();
        let mut prev: Option<i64> = None;
        for r in records {
            let ts = r.epoch_seconds();
            if let Some(p) = prev.and_then(|p| speed.pause(ts - p)) {
                std::thread::sleep(p);
            }
            prev = Some(ts);
            total.add(&self.ingest(r)?);
        }
        let elapsed = started.elapsed().as_secs_f64();
        Ok(ReplayStats {
            tx_per_second: if elapsed > 0.0 {
                total.ingested as f64 / elapsed
            } else {
                f64::INFINITY
            },
            outcome: total,
            elapsed_seconds: elapsed,
            seq: self.seq(),
            snapshot_hash: self.read().snapshot_hash(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStats {
    #[serde(flatten)]
    pub outcome: IngestOutcome,
    pub elapsed_seconds: f64,
    pub tx_per_second: f64,
    pub seq: u64,
    pub snapshot_hash: String,
}

struct Job<'a>(&'a AtomicBool);

impl Drop for Job<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ServiceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::invalid("scenario", format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| ServiceError::Invalid {
        field: Some(e.path().to_string()),
        message: format!("{}: {}", path.display(), e.inner()),
    })?;
    cfg.validate()
        .map_err(|e| ServiceError::invalid("scenario", e.to_string()))?;
    Ok(cfg)
}

/// Reads an exported dataset; corridor risks come from its header.
pub fn load_dataset(path: &Path) -> Result<(ScenarioConfig, Vec<TxRecord>), ServiceError> {
    let file =
        std::fs::File::open(path).map_err(|e| ServiceError::invalid("dataset", format!("{}: {e}", path.display())))?;
    let (header, records) =
        read_dataset(std::io::BufReader::new(file)).map_err(|e| ServiceError::invalid("dataset", e.to_string()))?;
    Ok((header.config, records))
}
