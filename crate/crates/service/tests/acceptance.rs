//! Acceptance run: one PASS or FAIL line per criterion, then a nonzero exit
//! if any failed. Runs as its own target with `cargo test --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remitwatch::api::router;
use remitwatch::log::read_log;
use remitwatch::store::Store;
use remitwatch::Service;
use remitwatch_core::analytics::{descriptive_stats, run_query, summarize, trend_line, AnalyticsError};
use remitwatch_core::chainsim::{read_dataset, ScenarioConfig, SimState};
use remitwatch_core::mlcore::logistic::train_logistic_traced;
use remitwatch_core::mlcore::workflow::train_model;
use remitwatch_core::mlcore::{
    adjusted_rand_index, classification_metrics, fit_ar, kmeans_fit, loss_and_gradient, pr_auc, roc_auc, train_gbm,
    GbmConfig, KMeansConfig, LogisticConfig, Model, ModelArtifact, ModelType,
};
use remitwatch_core::pipeline::features::{CorridorTable, FEATURE_NAMES};
use remitwatch_core::riskengine::{default_ruleset, AlertRule, RiskScore, RiskTier, RuleEngine, Ruleset};
use remitwatch_core::{FraudPattern, TxRecord};
use remitwatch_testkit::analytics as aoracle;
use remitwatch_testkit::cases;
use remitwatch_testkit::fixtures::{random_records, random_scores, record, T0};
use remitwatch_testkit::metrics::{count, rates, roc_auc_pairs};
use remitwatch_testkit::ml::{ari_pairs, logistic_loss, rel_err};
use remitwatch_testkit::rules::{brute_force_alerts, Fired};
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Ctx {
    dir: tempfile::TempDir,
    /// The fixed scenario exported over 2000 blocks by criterion 1.
    dataset: PathBuf,
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_remitwatch"));
    c.env("REMITWATCH_LOG", "warn");
    c
}

fn run_json(args: &[&str]) -> Result<Value, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn fixed_cfg() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixed.cfg")
}

fn load(path: &Path) -> Result<(ScenarioConfig, Vec<TxRecord>), String> {
    let f = std::fs::File::open(path).map_err(|e| e.to_string())?;
    let (header, records) = read_dataset(std::io::BufReader::new(f)).map_err(|e| e.to_string())?;
    Ok((header.config, records))
}

fn simulator_determinism(ctx: &Ctx) -> Outcome {
    let cfg = fixed_cfg();
    let cfg = cfg.to_str().unwrap();
    let other = ctx.dir.path().join("again.jsonl");
    let mut times = Vec::new();
    for out in [&ctx.dataset, &other] {
        let started = Instant::now();
        let v = run_json(&[
            "simulate",
            "--config",
            cfg,
            "--blocks",
            "2000",
            "--out",
            out.to_str().unwrap(),
        ])?;
        times.push(started.elapsed().as_secs_f64());
        ensure!(v["blocks"] == json!(2000), "blocks {}", v["blocks"]);
    }
    let (a, b) = (std::fs::read(&ctx.dataset).unwrap(), std::fs::read(&other).unwrap());
    ensure!(a == b, "the two exports differ");
    let (_, records) = load(&ctx.dataset)?;
    ensure!(records.len() >= 10_000, "only {} transactions", records.len());
    let slowest = times.iter().copied().fold(0.0, f64::max);
    ensure!(slowest < 10.0, "{slowest:.2}s for one run");
    Ok(format!(
        "{} tx, {} bytes identical, slowest run {slowest:.2}s",
        records.len(),
        a.len()
    ))
}

fn label_rate(ctx: &Ctx) -> Outcome {
    let (cfg, records) = load(&ctx.dataset)?;
    ensure!(cfg.fraud_rate == 0.02, "scenario fraud_rate {}", cfg.fraud_rate);
    ensure!(records.len() >= 10_000, "{} tx", records.len());
    let fraud = records.iter().filter(|r| r.label.is_fraud()).count();
    let f = fraud as f64 / records.len() as f64;
    ensure!((0.015..=0.025).contains(&f), "fraud fraction {f:.4}");
    Ok(format!("{fraud}/{} fraud = {f:.4}", records.len()))
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let (y, s) = cases::label_score_set(&mut rng);
        let threshold = [0.25, 0.5, 0.75][case % 3];
        let pred: Vec<u8> = s.iter().map(|v| u8::from(*v >= threshold)).collect();
        let m = classification_metrics(&y, &pred).map_err(|e| e.to_string())?;
        let c = count(&y, &pred);
        ensure!(
            (m.confusion.tp, m.confusion.fp, m.confusion.tn, m.confusion.fn_) == (c.tp, c.fp, c.tn, c.fn_),
            "case {case}: confusion"
        );
        ensure!(
            (m.accuracy, m.precision, m.recall, m.f1) == rates(c),
            "case {case}: rates"
        );
        let diff = (roc_auc(&y, &s).unwrap() - roc_auc_pairs(&y, &s)).abs();
        worst = worst.max(diff);
        ensure!(diff <= 1e-9, "case {case}: roc_auc off by {diff:e}");
        let perfect: Vec<f64> = y.iter().map(|v| f64::from(*v)).collect();
        ensure!(
            roc_auc(&y, &perfect).unwrap() == 1.0 && pr_auc(&y, &perfect).unwrap() == 1.0,
            "case {case}: scores = labels not perfect"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let y: Vec<u8> = (0..10_000).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let s: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let auc = roc_auc(&y, &s).unwrap();
    ensure!((0.47..=0.53).contains(&auc), "random scores roc_auc {auc}");
    Ok(format!(
        "1000 sets exact, worst auc diff {worst:.1e}, random auc {auc:.4}"
    ))
}

fn logistic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, d) = (40, 4);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..0.1);
        let (_, gw, gb) = loss_and_gradient(&w, b, &x, &y, l2);
        for k in 0..d {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (logistic_loss(&up, b, &x, &y, l2) - logistic_loss(&down, b, &x, &y, l2)) / (2.0 * h);
            worst = worst.max(rel_err(gw[k], fd));
        }
        let fd = (logistic_loss(&w, b + h, &x, &y, l2) - logistic_loss(&w, b - h, &x, &y, l2)) / (2.0 * h);
        worst = worst.max(rel_err(gb, fd));
    }
    ensure!(worst <= 1e-5, "gradient relative error {worst:e}");

    let (x, y) = cases::separable(&mut ChaCha8Rng::seed_from_u64(8), 400);
    let cfg = LogisticConfig {
        max_iters: 1000,
        l2: 0.0,
        ..LogisticConfig::default()
    };
    let (model, trace) = train_logistic_traced(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let iters = model.train_meta.iterations;
    ensure!(iters <= 1000, "{iters} iterations");
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(r, l)| u8::from(model.predict(r).unwrap() >= 0.5) == **l)
        .count();
    let acc = correct as f64 / x.len() as f64;
    ensure!(acc >= 0.99, "train accuracy {acc}");
    ensure!(trace.windows(2).all(|w| w[1] <= w[0]), "loss went up");
    Ok(format!(
        "gradient rel err {worst:.1e}, separable accuracy {acc:.3} in {iters} iterations, loss monotone"
    ))
}

fn held_out_auc(a: &ModelArtifact) -> f64 {
    a.metrics
        .as_ref()
        .and_then(|m| m.classification.as_ref())
        .map_or(f64::NAN, |c| c.roc_auc)
}

fn gbm(ctx: &Ctx) -> Outcome {
    let (x, y) = cases::rings(&mut ChaCha8Rng::seed_from_u64(13), 600);
    let cfg = GbmConfig {
        n_rounds: 200,
        subsample: 1.0,
        ..GbmConfig::default()
    };
    let m = train_gbm(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let hist = &m.train_meta.loss_history;
    ensure!(hist.len() == 201, "{} loss entries", hist.len());
    ensure!(hist.windows(2).all(|w| w[1] <= w[0]), "train log-loss rose");

    let (scenario, records) = load(&ctx.dataset)?;
    let corridors = CorridorTable::from_corridors(&scenario.corridors);
    let g = train_model(&records, &corridors, ModelType::Gbm, &Value::Null).map_err(|e| e.to_string())?;
    let l = train_model(&records, &corridors, ModelType::Logistic, &Value::Null).map_err(|e| e.to_string())?;
    let (ga, la) = (held_out_auc(&g), held_out_auc(&l));
    ensure!(ga >= 0.85, "gbm held-out auc {ga:.4}");
    ensure!(ga >= la + 0.05, "gbm {ga:.4} vs logistic {la:.4}");
    let Model::Gbm(gm) = &g.model else {
        return Err("not a gbm".into());
    };
    let gain = |name: &str| {
        let i = FEATURE_NAMES.iter().position(|f| *f == name).unwrap();
        gm.feature_gain.get(&i).copied().unwrap_or(0.0)
    };
    let wanted = [
        "sender_tx_count_24h",
        "sender_amount_sum_24h_log",
        "time_since_last_tx_log",
        "new_receiver",
    ];
    for f in wanted {
        ensure!(gain(f) > 0.0, "no gain on {f}");
    }
    Ok(format!(
        "loss monotone over 200 rounds; held-out auc gbm {ga:.4} vs logistic {la:.4}; gain {}",
        wanted.map(|f| format!("{f}={:.1}", gain(f))).join(" ")
    ))
}

fn kmeans() -> Outcome {
    let (x, truth) = cases::three_blobs(&mut ChaCha8Rng::seed_from_u64(21));
    let c = kmeans_fit(&x, 3, &KMeansConfig::default()).map_err(|e| e.to_string())?;
    ensure!(c.inertia_history.windows(2).all(|w| w[1] <= w[0]), "inertia rose");
    let found: Vec<usize> = x.iter().map(|p| c.assign(p).unwrap()).collect();
    let ari = adjusted_rand_index(&truth, &found).map_err(|e| e.to_string())?;
    ensure!(
        (ari - ari_pairs(&truth, &found)).abs() < 1e-12,
        "ari disagrees with pair counting"
    );
    ensure!(ari >= 0.99, "ari {ari}");
    Ok(format!(
        "{} iterations, inertia monotone, ari {ari:.4}",
        c.inertia_history.len()
    ))
}

fn autoregression() -> Outcome {
    let s = cases::ar1_series(&mut ChaCha8Rng::seed_from_u64(55), 0.7, 5000);
    let phi = fit_ar(&s, 1, 0).map_err(|e| e.to_string())?.coefficients[0];
    ensure!((0.65..=0.75).contains(&phi), "phi {phi}");
    let ramp: Vec<f64> = (0..200).map(|t| -7.0 + 0.125 * t as f64).collect();
    let f = fit_ar(&ramp, 1, 1)
        .and_then(|m| m.forecast(&ramp, 10))
        .map_err(|e| e.to_string())?;
    let worst = f
        .iter()
        .enumerate()
        .map(|(h, v)| (v - (-7.0 + 0.125 * (200 + h) as f64)).abs())
        .fold(0.0, f64::max);
    ensure!(worst <= 1e-9, "ramp forecast off by {worst:e}");
    Ok(format!("phi {phi:.4}, ramp forecast error {worst:.1e}"))
}

fn engine_alerts(records: &[TxRecord], scores: &BTreeMap<String, RiskScore>, ruleset: &Ruleset) -> Vec<Fired> {
    let mut engine = RuleEngine::new(ruleset.clone());
    records
        .iter()
        .flat_map(|r| engine.process(&scores[&r.tx_hash], r))
        .map(|a| (a.rule_id, a.customer_id, a.tx_hashes))
        .collect()
}

fn rules() -> Outcome {
    let mut compared = 0;
    for seed in 0..400 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = if seed % 100 == 0 {
            10_000
        } else {
            rng.random_range(1..400)
        };
        let senders = rng.random_range(1..12) * if n > 1000 { 40 } else { 1 };
        let span = [600, 7_200, 172_800, 30 * 86_400][rng.random_range(0..4)];
        let records = random_records(&mut rng, n, senders, span, seed % 2 == 1);
        let scores = random_scores(&mut rng, &records, 1.0);
        let rules: Vec<AlertRule> = (0..rng.random_range(1..6))
            .map(|i| cases::random_rule(&mut rng, i))
            .collect();
        let ruleset = Ruleset::new(rules).map_err(|e| e.to_string())?;
        let got = engine_alerts(&records, &scores, &ruleset);
        ensure!(
            got == brute_force_alerts(&records, &scores, &ruleset),
            "seed {seed}: alerts differ from brute force"
        );
        compared += got.len();
    }

    let cfg = ScenarioConfig::default();
    let threshold = cfg.report_threshold;
    let blocks = cfg.default_block_count();
    let mut sim = SimState::init_scenario(cfg).map_err(|e| e.to_string())?;
    sim.advance(blocks);
    let records = sim.records();
    let mined: BTreeSet<&str> = records.iter().map(|r| r.tx_hash.as_str()).collect();
    let bursts: Vec<BTreeSet<String>> = sim
        .injections()
        .iter()
        .filter(|i| i.pattern == FraudPattern::Structuring)
        .map(|i| {
            i.hashes
                .iter()
                .filter(|h| mined.contains(h.as_str()))
                .cloned()
                .collect::<BTreeSet<_>>()
        })
        .filter(|b| b.len() >= 5)
        .collect();
    ensure!(!bursts.is_empty(), "no structuring bursts were injected");
    let rule = default_ruleset(threshold)
        .get("structuring-24h")
        .cloned()
        .ok_or("no default structuring rule")?;
    let ruleset = Ruleset::new(vec![rule]).map_err(|e| e.to_string())?;
    let neutral: BTreeMap<String, RiskScore> = records
        .iter()
        .map(|r| {
            let s = RiskScore {
                tx_hash: r.tx_hash.clone(),
                model_id: String::new(),
                probability: 0.0,
                anomaly_score: 0.0,
                tier: RiskTier::Low,
            };
            (r.tx_hash.clone(), s)
        })
        .collect();
    let fired = engine_alerts(&records, &neutral, &ruleset);
    let detected = bursts
        .iter()
        .filter(|b| fired.iter().any(|(_, _, h)| b.contains(h.last().unwrap())))
        .count();
    let recall = detected as f64 / bursts.len() as f64;
    ensure!(
        recall >= 0.9,
        "structuring recall {recall:.3} over {} bursts",
        bursts.len()
    );
    Ok(format!(
        "400 datasets, {compared} alerts equal to brute force; structuring recall {detected}/{}",
        bursts.len()
    ))
}

fn analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for case in 0..1000 {
        let (records, scores) = cases::analytics_data(&mut rng);
        let q = cases::random_query(&mut rng, &records, &scores);
        let page = run_query(&records, &scores, &q).map_err(|e| format!("case {case}: {e}"))?;
        let got: Vec<String> = page.records.iter().map(|r| r.tx_hash.clone()).collect();
        ensure!(
            (page.total, got) == aoracle::query(&records, &scores, &q),
            "run_query case {case}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..1000 {
        let (records, scores) = cases::analytics_data(&mut rng);
        let spec = cases::random_summary_spec(&mut rng, &records, &scores);
        let table = summarize(&records, &scores, &spec).map_err(|e| format!("case {case}: {e}"))?;
        let got: Vec<aoracle::Group> = table.rows.into_iter().map(|r| (r.key, r.count, r.values)).collect();
        ensure!(
            got == aoracle::summarize(&records, &scores, &spec),
            "summarize case {case}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..1000 {
        let xs = cases::stats_series(&mut rng, case);
        let s = descriptive_stats(&xs).map_err(|e| e.to_string())?;
        let (n, mean, median, std, min, max, q1, q3) = aoracle::describe(&xs);
        ensure!(
            (s.n, s.mean, s.median, s.std, s.min, s.max, s.q1, s.q3) == (n, mean, median, std, min, max, q1, q3),
            "descriptive_stats case {case}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let points = cases::trend_points(&mut rng, case);
        let as_f: Vec<(f64, f64)> = points.iter().map(|&(t, y)| (t as f64, y as f64)).collect();
        match (trend_line(&as_f), aoracle::trend_exact(&points)) {
            (Err(AnalyticsError::DegenerateAbscissa), None) => {}
            (Ok(t), Some((slope, intercept, r2))) => {
                for (a, b) in [(t.slope, slope), (t.intercept, intercept), (t.r2, r2)] {
                    let e = (a - b).abs() / b.abs().max(1.0);
                    worst = worst.max(e);
                    ensure!(e <= 1e-9, "trend_line case {case}: {a} vs {b}");
                }
            }
            (got, want) => return Err(format!("trend_line case {case}: {got:?} vs {want:?}")),
        }
    }
    Ok(format!(
        "4 x 1000 cases; query, summary and stats exact; trend within {worst:.1e} of exact rationals"
    ))
}

fn event_log(ctx: &Ctx) -> Outcome {
    let data = ctx.dataset.to_str().unwrap();
    let log_a = ctx.dir.path().join("a/events.jsonl");
    let log_b = ctx.dir.path().join("b/events.jsonl");
    let a = run_json(&[
        "replay",
        "--data",
        data,
        "--speed",
        "max",
        "--log",
        log_a.to_str().unwrap(),
    ])?;
    let b = run_json(&[
        "replay",
        "--data",
        data,
        "--speed",
        "max",
        "--log",
        log_b.to_str().unwrap(),
    ])?;
    ensure!(a["snapshot_hash"] == b["snapshot_hash"], "two replays differ");
    let folded = run_json(&["replay", "--log", log_a.to_str().unwrap()])?;
    ensure!(
        folded["snapshot_hash"] == a["snapshot_hash"],
        "folding the log gives another snapshot"
    );
    let rate = a["tx_per_second"]
        .as_f64()
        .unwrap_or(0.0)
        .min(b["tx_per_second"].as_f64().unwrap_or(0.0));
    ensure!(rate >= 1000.0, "{rate:.0} tx/s");

    // cut the last event in half
    let bytes = std::fs::read(&log_a).unwrap();
    let events = read_log(&log_a).map_err(|e| e.to_string())?;
    let last_len = bytes[..bytes.len() - 1].rsplit(|b| *b == b'\n').next().unwrap().len() + 1;
    let keep = bytes.len() - last_len / 2;
    std::fs::OpenOptions::new()
        .write(true)
        .open(&log_a)
        .and_then(|f| f.set_len(keep as u64))
        .map_err(|e| e.to_string())?;
    let cfg = common::config(ctx.dir.path());
    let (svc, recovery) = Service::open_log(&log_a, &cfg, common::fixed_clock()).map_err(|e| e.to_string())?;
    ensure!(
        recovery.events == events.len() - 1,
        "kept {} of {} events",
        recovery.events,
        events.len()
    );
    ensure!(
        recovery.truncated_bytes == (keep - (bytes.len() - last_len)) as u64,
        "dropped {} bytes",
        recovery.truncated_bytes
    );
    let expected = Store::replay(&events[..events.len() - 1])
        .map_err(|e| e.to_string())?
        .snapshot_hash();
    ensure!(
        svc.read().snapshot_hash() == expected,
        "recovered state differs from the intact prefix"
    );
    Ok(format!(
        "{} events hash-equal across runs and fold; torn tail dropped {} bytes only; {rate:.0} tx/s",
        events.len(),
        recovery.truncated_bytes
    ))
}

fn api_contract() -> Outcome {
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let failures = common::goldens::walk(false).await;
        ensure!(
            failures.is_empty(),
            "{} golden mismatches, first: {}",
            failures.len(),
            failures[0].lines().next().unwrap_or("")
        );

        let dir = tempfile::tempdir().unwrap();
        let svc = common::open(dir.path());
        svc.ingest(record("0x01", "C1", "C2", T0, 1_500_000))
            .map_err(|e| e.to_string())?;
        let alert_id = svc.read().alerts().next().ok_or("no alert")?.alert_id.clone();
        let app = router(svc);
        let bad =
            json!({"rule_id": "r", "name": "n", "kind": "velocity", "params": {"max_tx": 2, "window_seconds": 0}});
        let r = common::call(&app, "POST", "/api/rules", Some(&bad)).await;
        ensure!(
            r.status.as_u16() == 400 && r.json()["field"] == json!("params.window_seconds"),
            "bad rule: {} {}",
            r.status,
            r.text
        );
        let r = common::call(&app, "POST", "/api/transactions/query", Some(&json!({"limit": 20000}))).await;
        ensure!(
            r.status.as_u16() == 400 && r.json()["field"] == json!("limit"),
            "bad query: {} {}",
            r.status,
            r.text
        );
        let uri = format!("/api/alerts/{alert_id}/transition");
        let r = common::call(&app, "POST", &uri, Some(&json!({"state": "escalated"}))).await;
        ensure!(r.status.as_u16() == 409, "open -> escalated gave {}", r.status);
        let a = common::call(&app, "GET", &format!("/api/alerts/{alert_id}"), None)
            .await
            .json();
        ensure!(a["state"] == json!("open"), "refused transition changed the alert");
        let goldens = std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/api"))
            .unwrap()
            .count();
        Ok(format!(
            "{goldens} goldens match; 400 names the field; illegal transition 409; no dashboard build involved"
        ))
    })
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Ctx {
        dataset: dir.path().join("fixed.jsonl"),
        dir,
    };
    let criteria: Vec<(&str, Check)> = vec![
        ("simulator determinism", Box::new(|| simulator_determinism(&ctx))),
        ("label-rate convergence", Box::new(|| label_rate(&ctx))),
        ("metrics oracle suite", Box::new(metrics_oracle)),
        ("logistic regression", Box::new(logistic)),
        ("gradient boosting", Box::new(|| gbm(&ctx))),
        ("k-means", Box::new(kmeans)),
        ("AR forecaster", Box::new(autoregression)),
        ("rules engine", Box::new(rules)),
        ("analytics oracle", Box::new(analytics)),
        ("event log", Box::new(|| event_log(&ctx))),
        ("API contract", Box::new(api_contract)),
    ];
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (verdict, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(stdout.lock(), "{verdict} {:>2} {name}: {detail} ({secs:.1}s)", i + 1).unwrap();
    }
    writeln!(
        stdout.lock(),
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    )
    .unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
