//! Command-line entry points.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use remitwatch_core::chainsim::{export_dataset, SimState};
use remitwatch_core::mlcore::workflow::{evaluate, train_model, DEFAULT_THRESHOLD};
use remitwatch_core::mlcore::{ModelArtifact, ModelType};
use remitwatch_core::pipeline::features::CorridorTable;
use serde_json::{json, Value};

use crate::config::{Overrides, ServiceConfig};
use crate::log::read_log;
use crate::runtime::{load_dataset, load_scenario, Service, Speed};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "remitwatch", version, about = "Remittance transaction monitoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset from a scenario.
    Simulate(SimulateArgs),
    /// Train a model on an exported dataset.
    Train(TrainArgs),
    /// Print the metrics of an artifact on a dataset.
    Evaluate(EvaluateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Stream a dataset through scoring and rules, or fold an existing log.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (JSON); the reference scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Blocks to mine; defaults to the scenario's duration.
    #[arg(long)]
    pub blocks: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_model_type)]
    pub model: ModelType,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hyperparameters (JSON object).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "REMITWATCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "REMITWATCH_LISTEN")]
    pub listen: Option<String>,
    #[arg(long, env = "REMITWATCH_PORT")]
    pub port: Option<u16>,
    #[arg(long, env = "REMITWATCH_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "REMITWATCH_SCENARIO")]
    pub scenario: Option<PathBuf>,
    #[arg(long, env = "REMITWATCH_HEARTBEAT_SECONDS")]
    pub heartbeat_seconds: Option<u64>,
}

impl ServeArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            listen: self.listen.clone(),
            port: self.port,
            data_dir: self.data_dir.clone(),
            scenario: self.scenario.clone(),
            heartbeat_seconds: self.heartbeat_seconds,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Exported dataset to stream. Without it, `--log` is folded and its
    /// snapshot hash printed.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `max` or a multiple of real time.
    #[arg(long, default_value = "max")]
    pub speed: Speed,
    /// Artifact used for scoring; a GBM is trained on the dataset otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Event log to write; a temporary file when omitted.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

fn parse_model_type(s: &str) -> Result<ModelType, String> {
    s.parse()
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Evaluate(a) => evaluate_cmd(&a, out),
        Command::Serve(a) => serve(&a),
        Command::Replay(a) => replay(&a, out),
    }
}

fn print_json(out: &mut dyn Write, v: &Value) -> anyhow::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_scenario(p)?,
        None => Default::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let blocks = a.blocks.unwrap_or_else(|| cfg.default_block_count());
    let mut sim = SimState::init_scenario(cfg)?;
    sim.advance(blocks);
    let file = std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let records = export_dataset(&sim, BufWriter::new(file))?;
    print_json(out, &json!({"blocks": blocks, "records": records, "out": a.out}))
}

fn read_hyperparameters(path: Option<&Path>) -> anyhow::Result<Value> {
    match path {
        None => Ok(Value::Null),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

pub fn train(a: &TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let hyper = read_hyperparameters(a.config.as_deref())?;
    let (cfg, records) = load_dataset(&a.data)?;
    let artifact = train_model(
        &records,
        &CorridorTable::from_corridors(&cfg.corridors),
        a.model,
        &hyper,
    )?;
    artifact.save(&a.out)?;
    print_json(
        out,
        &json!({"model_type": artifact.model_type(), "out": a.out, "metrics": artifact.metrics}),
    )
}

pub fn evaluate_cmd(a: &EvaluateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let artifact = ModelArtifact::load(&a.model)?;
    let (_, records) = load_dataset(&a.data)?;
    let report = evaluate(&artifact, &records, a.threshold)?;
    print_json(out, &serde_json::to_value(report)?)
}

fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let config = ServiceConfig::resolve(a.config.as_deref(), &a.overrides())?;
    let (svc, recovery) = Service::open(&config).context("refusing to start")?;
    if recovery.truncated_bytes > 0 {
        tracing::warn!(
            bytes = recovery.truncated_bytes,
            "dropped a partial event at the end of the log"
        );
    }
    tracing::info!(events = recovery.events, seq = svc.seq(), "event log loaded");
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr = format!("{}:{}", config.listen, config.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, crate::api::router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

/// Removes the temporary log on every exit path.
struct TempLog(PathBuf);

impl Drop for TempLog {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
        if let Some(dir) = self.0.parent() {
            let _ = std::fs::remove_dir_all(dir.join("reports"));
            let _ = std::fs::remove_dir(dir);
        }
    }
}

pub fn replay(a: &ReplayArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let Some(data) = &a.data else {
        let Some(log) = &a.log else {
            bail!("replay needs --data, --log or both");
        };
        let events = read_log(log)?;
        let store = Store::replay(&events)?;
        return print_json(
            out,
            &json!({"seq": store.seq(), "snapshot_hash": store.snapshot_hash()}),
        );
    };
    let (scenario, records) = load_dataset(data)?;
    let artifact = match &a.model {
        Some(p) => ModelArtifact::load(p)?,
        None => train_model(
            &records,
            &CorridorTable::from_corridors(&scenario.corridors),
            ModelType::Gbm,
            &Value::Null,
        )?,
    };
    let _guard;
    let log = match &a.log {
        Some(p) => p.clone(),
        None => {
            let nanos = Utc::now().timestamp_nanos_opt().unwrap_or_default();
            let dir = std::env::temp_dir().join(format!("remitwatch-replay-{}-{nanos}", std::process::id()));
            let p = dir.join("events.jsonl");
            _guard = TempLog(p.clone());
            p
        }
    };
    let config = ServiceConfig::default();
    let (svc, _) = Service::open_log(&log, &config, Arc::new(Utc::now))?;
    if svc.seq() > 0 {
        bail!("{} already holds events; replay into a fresh log", log.display());
    }
    svc.seed(&scenario)?;
    svc.register_model(artifact, true)?;
    let stats = svc.replay_records(records, a.speed)?;
    print_json(out, &serde_json::to_value(stats)?)
}
