//! Records, scores and scenarios for tests.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use remitwatch_core::chainsim::{ScenarioConfig, SimState};
use remitwatch_core::riskengine::{RiskScore, TierThresholds};
use remitwatch_core::{FraudPattern, Label, Reason, TxRecord};

/// 2023-01-01T00:00:00Z, the reference scenario's start.
pub const T0: i64 = 1_672_531_200;

pub fn at(epoch_seconds: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(epoch_seconds, 0).unwrap()
}

pub fn record(hash: &str, sender: &str, receiver: &str, ts: i64, amount_minor: u64) -> TxRecord {
    TxRecord {
        tx_hash: hash.into(),
        sender_id: sender.into(),
        sender_name: format!("Name {sender}"),
        sender_address: "1 Main St, Lagos".into(),
        sender_identification_number: format!("ID-{sender}"),
        sender_wallet: format!("0x{}", "a".repeat(40)),
        receiver_id: receiver.into(),
        receiver_name: format!("Name {receiver}"),
        receiver_address: "2 High St, Manila".into(),
        receiver_identification_number: format!("ID-{receiver}"),
        receiver_wallet: format!("0x{}", "b".repeat(40)),
        amount_minor,
        currency: "USD".into(),
        destination_currency: "PHP".into(),
        reason: Reason::FamilySupport,
        timestamp: at(ts),
        fee_minor: amount_minor / 100,
        gas_fee_minor: 0,
        block_height: 0,
        label: Label::Legit,
    }
}

const CURRENCIES: [&str; 3] = ["USD", "EUR", "GBP"];
const DESTINATIONS: [&str; 4] = ["PHP", "MXN", "NGN", "INR"];

/// Amounts cluster around a 10,000.00 threshold so amount, structuring and
/// range predicates all see both outcomes.
fn amount(rng: &mut ChaCha8Rng) -> u64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(1..=5_000_00),
        1 => rng.random_range(6_500_00..10_000_00),
        2 => rng.random_range(9_990_00..=10_010_00),
        _ => rng.random_range(10_000_00..=50_000_00),
    }
}

/// `n` records over `senders` customers spread across `span` seconds, in
/// arrival order. With `shuffle_time` set, arrival order and timestamp
/// order disagree, as they can for transactions mined out of order.
pub fn random_records(rng: &mut ChaCha8Rng, n: usize, senders: usize, span: i64, shuffle_time: bool) -> Vec<TxRecord> {
    let mut times: Vec<i64> = (0..n).map(|_| T0 + rng.random_range(0..span.max(1))).collect();
    if !shuffle_time {
        times.sort_unstable();
    }
    (0..n)
        .map(|i| {
            let sender = format!("C{:03}", rng.random_range(0..senders));
            let receiver = format!("C{:03}", rng.random_range(0..senders + 5));
            let mut r = record(&format!("0x{i:064x}"), &sender, &receiver, times[i], amount(rng));
            r.currency = CURRENCIES[rng.random_range(0..CURRENCIES.len())].into();
            r.destination_currency = DESTINATIONS[rng.random_range(0..DESTINATIONS.len())].into();
            r.reason = Reason::ALL[rng.random_range(0..Reason::ALL.len())];
            r.fee_minor = r.amount_minor / 100;
            r.gas_fee_minor = rng.random_range(0..500);
            r.block_height = (times[i] - T0) as u64 / 13;
            r.label = if rng.random_bool(0.1) {
                Label::Fraud(FraudPattern::ALL[rng.random_range(0..4)])
            } else {
                Label::Legit
            };
            r
        })
        .collect()
}

/// Scores for roughly `coverage` of the records. Probabilities are drawn
/// from a coarse grid so ties and exact threshold hits occur.
pub fn random_scores(rng: &mut ChaCha8Rng, records: &[TxRecord], coverage: f64) -> BTreeMap<String, RiskScore> {
    let tiers = TierThresholds::default();
    let mut out = BTreeMap::new();
    for r in records {
        if !rng.random_bool(coverage) {
            continue;
        }
        let probability = f64::from(rng.random_range(0..=20u32)) / 20.0;
        let score = RiskScore {
            tx_hash: r.tx_hash.clone(),
            model_id: "M-test".into(),
            probability,
            anomaly_score: f64::from(rng.random_range(0..=40u32)) / 2.0,
            tier: tiers.tier(probability),
        };
        out.insert(r.tx_hash.clone(), score);
    }
    out
}

/// The reference scenario shrunk for fast tests.
pub fn small_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_customers: 300,
        ..ScenarioConfig::default()
    }
}

pub fn simulate(cfg: ScenarioConfig, blocks: u64) -> Vec<TxRecord> {
    let mut sim = SimState::init_scenario(cfg).expect("valid scenario");
    sim.advance(blocks);
    sim.records()
}
