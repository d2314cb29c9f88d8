mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;

use remitwatch::log::{read_log, LogError};
use remitwatch::store::Store;
use remitwatch::{Service, ServiceError};
use remitwatch_core::chainsim::ScenarioConfig;
use remitwatch_testkit::fixtures::{record, T0};
use serde_json::Value;

fn populate(dir: &Path, n: usize) -> String {
    let svc = common::open(dir);
    let records = (0..n).map(|i| {
        record(
            &format!("0x{i:04x}"),
            &format!("C{}", i % 5),
            "R",
            T0 + i as i64 * 40,
            2_000 + 97 * i as u64,
        )
    });
    svc.ingest_many(records).unwrap();
    let hash = svc.read().snapshot_hash();
    hash
}

fn reopen(dir: &Path) -> Result<(std::sync::Arc<Service>, remitwatch::log::Recovery), ServiceError> {
    let cfg = common::config(dir);
    Service::open_log(&cfg.log_path(), &cfg, common::fixed_clock())
}

#[test]
fn torn_tail_is_dropped_and_the_rest_kept() {
    let dir = tempfile::tempdir().unwrap();
    let hash = populate(dir.path(), 40);
    let path = common::config(dir.path()).log_path();
    let intact = std::fs::read(&path).unwrap();
    let before = read_log(&path).unwrap().len();

    // half of a real line, as a crash mid-write leaves it
    let last_line = intact[..intact.len() - 1]
        .rsplit(|b| *b == b'\n')
        .next()
        .unwrap()
        .to_vec();
    let torn = &last_line[..last_line.len() / 2];
    std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(torn)
        .unwrap();

    let (svc, recovery) = reopen(dir.path()).unwrap();
    assert_eq!(recovery.events, before);
    assert_eq!(recovery.truncated_bytes, torn.len() as u64);
    assert_eq!(std::fs::read(&path).unwrap(), intact);
    assert_eq!(svc.read().snapshot_hash(), hash);

    // appends continue the sequence
    svc.ingest(record("0xffff", "C9", "R", T0 + 90_000, 5_000)).unwrap();
    let events = read_log(&path).unwrap();
    assert!(events.len() > before);
    assert!(events.iter().enumerate().all(|(i, e)| e.seq == i as u64 + 1));
}

#[test]
fn a_terminated_but_unparseable_last_line_is_also_torn() {
    let dir = tempfile::tempdir().unwrap();
    populate(dir.path(), 5);
    let path = common::config(dir.path()).log_path();
    let intact = std::fs::read(&path).unwrap();
    std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(b"{\"seq\":\n")
        .unwrap();
    let (_, recovery) = reopen(dir.path()).unwrap();
    assert_eq!(recovery.truncated_bytes, 8);
    assert_eq!(std::fs::read(&path).unwrap(), intact);
}

#[test]
fn damage_before_the_tail_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    populate(dir.path(), 20);
    let path = common::config(dir.path()).log_path();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();

    let mut garbled = lines.clone();
    let half = garbled[9].len() / 2;
    garbled[9].truncate(half);
    std::fs::write(&path, garbled.join("\n") + "\n").unwrap();
    match reopen(dir.path()) {
        Err(ServiceError::Log(LogError::Corrupt { line, .. })) => assert_eq!(line, 10),
        other => panic!("expected corruption, got {:?}", other.map(|_| ())),
    }
    // the file is left exactly as found
    assert_eq!(std::fs::read_to_string(&path).unwrap(), garbled.join("\n") + "\n");

    // a missing event is a gap
    lines.remove(4);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    match reopen(dir.path()) {
        Err(ServiceError::Log(LogError::Corrupt { line, reason })) => {
            assert_eq!(line, 5);
            assert!(reason.contains("sequence 6"), "{reason}");
        }
        other => panic!("expected a gap, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn folding_the_log_rebuilds_the_live_state() {
    let dir = tempfile::tempdir().unwrap();
    let live = populate(dir.path(), 300);
    let events = read_log(&common::config(dir.path()).log_path()).unwrap();
    assert_eq!(Store::replay(&events).unwrap().snapshot_hash(), live);
    assert_eq!(Store::replay(&events).unwrap().snapshot_hash(), live);
    let (svc, recovery) = reopen(dir.path()).unwrap();
    assert_eq!(recovery.truncated_bytes, 0);
    assert_eq!(svc.read().snapshot_hash(), live);
}

fn cli(args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_remitwatch"))
        .args(args)
        .env("REMITWATCH_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn replaying_a_dataset_twice_gives_the_same_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    common::export(
        ScenarioConfig {
            seed: 5,
            ..ScenarioConfig::default()
        },
        150,
        &data,
    );
    let data = data.to_str().unwrap();
    let log_a = dir.path().join("a/events.jsonl");
    let log_b = dir.path().join("b/events.jsonl");

    let a = cli(&["replay", "--data", data, "--log", log_a.to_str().unwrap()]);
    let b = cli(&["replay", "--data", data, "--log", log_b.to_str().unwrap()]);
    assert_eq!(a["snapshot_hash"], b["snapshot_hash"]);
    assert_eq!(a["seq"], b["seq"]);
    assert!(a["ingested"].as_u64().unwrap() > 500, "{a}");

    let folded = cli(&["replay", "--log", log_a.to_str().unwrap()]);
    assert_eq!(folded["snapshot_hash"], a["snapshot_hash"]);
    assert_eq!(folded["seq"], a["seq"]);

    // the logs differ only in wall-clock stamps
    let strip = |p: &Path| -> Vec<Value> {
        read_log(p)
            .unwrap()
            .into_iter()
            .map(|e| {
                let mut v = serde_json::to_value(e).unwrap();
                v.as_object_mut().unwrap().remove("recorded_at");
                v
            })
            .collect()
    };
    assert_eq!(strip(&log_a), strip(&log_b));
}
