//! Set `REMITWATCH_BLESS=1` to rewrite the goldens after an intended
//! change, then review the diff.

mod common;

#[tokio::test(flavor = "multi_thread")]
async fn every_endpoint_matches_its_golden() {
    let bless = std::env::var("REMITWATCH_BLESS").is_ok_and(|v| v == "1");
    let failures = common::goldens::walk(bless).await;
    assert!(
        failures.is_empty(),
        "{} golden mismatches:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
