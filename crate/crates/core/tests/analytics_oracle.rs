use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use remitwatch_core::analytics::{descriptive_stats, run_query, summarize, trend_line, AnalyticsError};
use remitwatch_testkit::analytics as oracle;
use remitwatch_testkit::cases::{analytics_data, random_query, random_summary_spec, stats_series, trend_points};

#[test]
fn queries_match_a_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut nonempty = 0;
    for case in 0..1000 {
        let (records, scores) = analytics_data(&mut rng);
        let q = random_query(&mut rng, &records, &scores);
        let page = run_query(&records, &scores, &q).unwrap();
        let (total, hashes) = oracle::query(&records, &scores, &q);
        let got: Vec<String> = page.records.iter().map(|r| r.tx_hash.clone()).collect();
        nonempty += usize::from(!hashes.is_empty());
        assert_eq!((page.total, got), (total, hashes), "case {case}: {q:?}");
    }
    assert!(nonempty > 300, "only {nonempty} cases returned records");
}

#[test]
fn summaries_match_a_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut grouped = 0;
    for case in 0..1000 {
        let (records, scores) = analytics_data(&mut rng);
        let spec = random_summary_spec(&mut rng, &records, &scores);
        let table = summarize(&records, &scores, &spec).unwrap();
        let expected = oracle::summarize(&records, &scores, &spec);
        let got: Vec<oracle::Group> = table.rows.into_iter().map(|r| (r.key, r.count, r.values)).collect();
        assert_eq!(got, expected, "case {case}: {spec:?}");
        assert_eq!(table.total_count, expected.iter().map(|g| g.1).sum::<usize>());
        grouped += usize::from(expected.len() > 1);
    }
    assert!(grouped > 300, "only {grouped} cases produced several groups");
}

#[test]
fn descriptive_stats_match_literal_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..1000 {
        let xs = stats_series(&mut rng, case);
        let s = descriptive_stats(&xs).unwrap();
        let (n2, mean, median, std, min, max, q1, q3) = oracle::describe(&xs);
        assert_eq!(s.n, n2);
        assert_eq!(
            (s.min, s.max, s.median, s.q1, s.q3),
            (min, max, median, q1, q3),
            "case {case}"
        );
        assert_eq!(s.mean, mean, "case {case}");
        assert_eq!(s.std, std, "case {case}");
    }
    assert_eq!(descriptive_stats(&[]), Err(AnalyticsError::EmptySeries));
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

#[test]
fn trend_lines_match_exact_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for case in 0..1000 {
        let points = trend_points(&mut rng, case);
        let as_f: Vec<(f64, f64)> = points.iter().map(|&(t, y)| (t as f64, y as f64)).collect();
        match (trend_line(&as_f), oracle::trend_exact(&points)) {
            (Err(AnalyticsError::DegenerateAbscissa), None) => {}
            (Ok(t), Some((slope, intercept, r2))) => {
                assert!(close(t.slope, slope), "case {case}: slope {} vs {slope}", t.slope);
                assert!(
                    close(t.intercept, intercept),
                    "case {case}: intercept {} vs {intercept}",
                    t.intercept
                );
                assert!(close(t.r2, r2), "case {case}: r2 {} vs {r2}", t.r2);
            }
            (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
        }
    }
}
