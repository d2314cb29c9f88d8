use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remitwatch_core::chainsim::{ScenarioConfig, SimState};
use remitwatch_core::riskengine::{default_ruleset, AlertRule, RiskScore, RiskTier, RuleEngine, Ruleset};
use remitwatch_core::{FraudPattern, Label, TxRecord};
use remitwatch_testkit::cases::random_rule;
use remitwatch_testkit::fixtures::{random_records, random_scores};
use remitwatch_testkit::rules::{brute_force_alerts, Fired};

fn engine_alerts(records: &[TxRecord], scores: &BTreeMap<String, RiskScore>, ruleset: &Ruleset) -> Vec<Fired> {
    let mut engine = RuleEngine::new(ruleset.clone());
    records
        .iter()
        .flat_map(|r| engine.process(&scores[&r.tx_hash], r))
        .map(|a| (a.rule_id, a.customer_id, a.tx_hashes))
        .collect()
}

fn check(seed: u64, shuffle_time: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..400);
    let senders = rng.random_range(1..12);
    // a month of shuffled timestamps puts records weeks behind their sender
    let span = [600, 7_200, 172_800, 30 * 86_400][rng.random_range(0..4)];
    let records = random_records(&mut rng, n, senders, span, shuffle_time);
    let scores = random_scores(&mut rng, &records, 1.0);
    let rules: Vec<AlertRule> = (0..rng.random_range(1..6)).map(|i| random_rule(&mut rng, i)).collect();
    let ruleset = Ruleset::new(rules).unwrap();
    assert_eq!(
        engine_alerts(&records, &scores, &ruleset),
        brute_force_alerts(&records, &scores, &ruleset),
        "seed {seed}, shuffled {shuffle_time}, rules {:?}",
        ruleset.rules
    );
}

#[test]
fn random_rulesets_match_brute_force() {
    for seed in 0..300 {
        check(seed, false);
    }
}

#[test]
fn out_of_order_timestamps_match_brute_force() {
    for seed in 1000..1300 {
        check(seed, true);
    }
}

#[test]
fn large_dataset_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let records = random_records(&mut rng, 10_000, 400, 30 * 86_400, false);
    let scores = random_scores(&mut rng, &records, 1.0);
    let mut ruleset = default_ruleset(10_000_00);
    ruleset.rules.push(random_rule(&mut rng, 9));
    assert_eq!(
        engine_alerts(&records, &scores, &ruleset),
        brute_force_alerts(&records, &scores, &ruleset)
    );
}

#[test]
fn severity_is_the_higher_of_rule_and_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let records = random_records(&mut rng, 300, 5, 3_600, false);
    let scores = random_scores(&mut rng, &records, 1.0);
    let mut engine = RuleEngine::new(default_ruleset(10_000_00));
    for r in &records {
        let s = &scores[&r.tx_hash];
        for a in engine.process(s, r) {
            assert!(a.severity >= s.tier);
            if a.rule_id == "structuring-24h" {
                assert_eq!(a.severity, RiskTier::High);
            }
        }
    }
}

/// Every injected structuring burst should raise a structuring alert whose
/// trigger belongs to the burst.
#[test]
fn default_structuring_rule_finds_injected_bursts() {
    let cfg = ScenarioConfig::default();
    let threshold = cfg.report_threshold;
    let blocks = cfg.default_block_count();
    let mut sim = SimState::init_scenario(cfg).unwrap();
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
    assert!(bursts.len() >= 5, "only {} fully mined bursts", bursts.len());
    let ruleset = Ruleset::new(vec![default_ruleset(threshold).get("structuring-24h").unwrap().clone()]).unwrap();
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
    assert!(recall >= 0.9, "recall {recall} over {} bursts", bursts.len());
    let structuring_labels = records
        .iter()
        .filter(|r| r.label == Label::Fraud(FraudPattern::Structuring))
        .count();
    assert!(structuring_labels >= 25);
}
