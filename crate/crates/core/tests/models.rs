use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use remitwatch_core::mlcore::logistic::train_logistic_traced;
use remitwatch_core::mlcore::{
    adjusted_rand_index, fit_ar, kmeans_fit, log_loss, loss_and_gradient, train_gbm, GbmConfig, KMeansConfig,
    LogisticConfig,
};
use remitwatch_testkit::cases::{ar1_series, rings, separable, three_blobs};
use remitwatch_testkit::ml::{ari_pairs, logistic_loss, rel_err};

#[test]
fn logistic_gradient_matches_central_differences() {
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
        let (loss, gw, gb) = loss_and_gradient(&w, b, &x, &y, l2);
        assert!((loss - logistic_loss(&w, b, &x, &y, l2)).abs() < 1e-12);
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
    assert!(worst <= 1e-5, "worst relative error {worst}");
}

#[test]
fn logistic_separates_a_separable_toy_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, y) = separable(&mut rng, 400);
    let cfg = LogisticConfig {
        max_iters: 1000,
        l2: 0.0,
        ..LogisticConfig::default()
    };
    let (model, trace) = train_logistic_traced(&x, &y, &cfg).unwrap();
    assert!(model.train_meta.iterations <= 1000);
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(row, label)| u8::from(model.predict(row).unwrap() >= 0.5) == **label)
        .count();
    assert!(correct as f64 / x.len() as f64 >= 0.99, "{correct}/400");
    assert!(trace.windows(2).all(|w| w[1] <= w[0]), "loss went up");
}

#[test]
fn gbm_train_loss_never_rises_and_truncation_replays_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (x, y) = rings(&mut rng, 600);
    let cfg = GbmConfig {
        n_rounds: 200,
        subsample: 1.0,
        ..GbmConfig::default()
    };
    let model = train_gbm(&x, &y, &cfg).unwrap();
    let h = &model.train_meta.loss_history;
    assert_eq!(h.len(), 201);
    assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12), "train loss rose");
    assert!(h[200] < 0.5 * h[0]);
    for k in [0, 1, 17, 200] {
        let t = model.truncated(k);
        let p: Vec<f64> = x.iter().map(|row| t.predict(row).unwrap()).collect();
        assert!((log_loss(&y, &p) - h[k]).abs() < 1e-9, "k = {k}");
    }
}

#[test]
fn kmeans_recovers_three_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, truth) = three_blobs(&mut rng);
    let c = kmeans_fit(&x, 3, &KMeansConfig::default()).unwrap();
    assert!(c.inertia_history.windows(2).all(|w| w[1] <= w[0]), "inertia rose");
    let found: Vec<usize> = x.iter().map(|p| c.assign(p).unwrap()).collect();
    let ari = adjusted_rand_index(&truth, &found).unwrap();
    assert!((ari - ari_pairs(&truth, &found)).abs() < 1e-12);
    assert!(ari >= 0.99, "{ari}");
}

#[test]
fn ari_agrees_with_pair_counting_on_random_labelings() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..200 {
        let n = rng.random_range(2..60);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let got = adjusted_rand_index(&a, &b).unwrap();
        assert!((got - ari_pairs(&a, &b)).abs() < 1e-9, "{a:?} {b:?}");
    }
}

#[test]
fn ar1_coefficient_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let s = ar1_series(&mut rng, 0.7, 5000);
    let m = fit_ar(&s, 1, 0).unwrap();
    assert!((0.65..=0.75).contains(&m.coefficients[0]), "{}", m.coefficients[0]);
}

#[test]
fn differenced_forecast_continues_a_ramp() {
    let s: Vec<f64> = (0..200).map(|t| -7.0 + 0.125 * t as f64).collect();
    let m = fit_ar(&s, 1, 1).unwrap();
    for (h, v) in m.forecast(&s, 10).unwrap().iter().enumerate() {
        assert!((v - (-7.0 + 0.125 * (200 + h) as f64)).abs() <= 1e-9);
    }
}

fn held_out_auc(a: &remitwatch_core::mlcore::ModelArtifact) -> f64 {
    a.metrics.as_ref().unwrap().classification.as_ref().unwrap().roc_auc
}

#[test]
fn gbm_beats_logistic_on_the_reference_scenario() {
    use remitwatch_core::chainsim::{ScenarioConfig, SimState};
    use remitwatch_core::mlcore::workflow::train_model;
    use remitwatch_core::mlcore::{Model, ModelType};
    use remitwatch_core::pipeline::features::{CorridorTable, FEATURE_NAMES};

    let cfg = ScenarioConfig::default();
    let corridors = CorridorTable::from_corridors(&cfg.corridors);
    let mut sim = SimState::init_scenario(cfg).unwrap();
    sim.advance(2000);
    let records = sim.records();
    assert!(records.len() >= 10_000);
    let gbm = train_model(&records, &corridors, ModelType::Gbm, &serde_json::Value::Null).unwrap();
    let logistic = train_model(&records, &corridors, ModelType::Logistic, &serde_json::Value::Null).unwrap();
    let (g, l) = (held_out_auc(&gbm), held_out_auc(&logistic));
    assert!(g >= 0.85 && g >= l + 0.05, "gbm {g} logistic {l}");
    let Model::Gbm(m) = &gbm.model else { unreachable!() };
    for name in ["sender_tx_count_24h", "new_receiver"] {
        let i = FEATURE_NAMES.iter().position(|f| *f == name).unwrap();
        assert!(
            m.feature_gain.get(&i).is_some_and(|g| *g > 0.0),
            "{name} unused: {:?}",
            m.feature_gain
        );
    }
}
