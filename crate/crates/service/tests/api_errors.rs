mod common;

use common::{call, open};
use remitwatch::api::router;
use remitwatch_testkit::fixtures::{record, T0};
use serde_json::{json, Value};

fn app_with_alert() -> (axum::Router, String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    svc.ingest_many([
        record("0x01", "C1", "C2", T0, 1_500_000),
        record("0x02", "C1", "C3", T0 + 60, 2_000),
    ])
    .unwrap();
    let alert_id = svc.read().alerts().next().expect("large amount fires").alert_id.clone();
    (router(svc), alert_id, dir)
}

#[tokio::test]
async fn bad_input_names_the_field() {
    let (app, alert_id, _dir) = app_with_alert();
    let transition = format!("/api/alerts/{alert_id}/transition");
    let cases: Vec<(&str, &str, Option<Value>, &str)> = vec![
        (
            "POST",
            "/api/rules",
            Some(json!({"rule_id": "r", "kind": "velocity", "params": {"max_tx": 2, "window_seconds": 60}})),
            "name",
        ),
        (
            "POST",
            "/api/rules",
            Some(json!({"rule_id": "r", "name": "n", "kind": "amount_threshold", "params": {"min_amount_minor": 0}})),
            "params.min_amount_minor",
        ),
        (
            "POST",
            "/api/rules",
            Some(
                json!({"rule_id": "r", "name": "n", "kind": "velocity", "params": {"max_tx": 2, "window_seconds": 0}}),
            ),
            "params.window_seconds",
        ),
        (
            "POST",
            "/api/rules",
            Some(json!({"rule_id": "r", "name": "n", "kind": "teleport", "params": {}})),
            "kind",
        ),
        (
            "POST",
            "/api/rules",
            Some(
                json!({"rule_id": "r", "name": "n", "kind": "velocity", "params": {"max_tx": "two", "window_seconds": 60}}),
            ),
            "params.max_tx",
        ),
        (
            "POST",
            "/api/rules",
            Some(json!({"rule_id": "r", "name": "n", "kind": "velocity", "params": {"max_tx": 2}})),
            "params.window_seconds",
        ),
        (
            "POST",
            "/api/rules",
            Some(
                json!({"rule_id": "r", "name": "n", "kind": "velocity", "params": {"max_tx": 2, "window_seconds": 60}, "actions": ["page"]}),
            ),
            "actions[0]",
        ),
        (
            "PUT",
            "/api/rules/large-amount",
            Some(
                json!({"rule_id": "other", "name": "n", "kind": "amount_threshold", "params": {"min_amount_minor": 5}}),
            ),
            "rule_id",
        ),
        (
            "POST",
            "/api/transactions/query",
            Some(json!({"limit": 20000})),
            "limit",
        ),
        (
            "POST",
            "/api/transactions/query",
            Some(json!({"filters": [{"field": "colour", "op": "=", "value": "red"}]})),
            "colour",
        ),
        (
            "POST",
            "/api/transactions/query",
            Some(json!({"filters": [{"field": "amount_minor", "op": "contains", "value": "1"}]})),
            "amount_minor",
        ),
        (
            "POST",
            "/api/transactions/query",
            Some(json!({"filters": [{"field": "amount_minor", "op": "<", "value": "lots"}]})),
            "amount_minor",
        ),
        (
            "POST",
            "/api/transactions/query",
            Some(json!({"sort": {"field": "amount_minor", "direction": "sideways"}})),
            "sort.direction",
        ),
        ("GET", "/api/transactions?filter=amount_minor:~:5", None, "amount_minor"),
        ("GET", "/api/transactions?filter=broken", None, "filter"),
        ("GET", "/api/transactions?limit=many", None, "limit"),
        ("GET", "/api/transactions?from=yesterday", None, "from"),
        ("GET", "/api/transactions?colour=red", None, "colour"),
        ("POST", &transition, Some(json!({"note": "no state"})), "state"),
        ("POST", &transition, Some(json!({"state": "snoozed"})), "state"),
        ("GET", "/api/alerts?state=snoozed", None, "state"),
        ("GET", "/api/alerts?severity=high", None, "severity"),
        (
            "POST",
            "/api/scenario",
            Some(json!({"config": {"fraud_rate": 2.0}, "wait": true})),
            "config",
        ),
        (
            "POST",
            "/api/scenario",
            Some(json!({"config": {"seed": "seven"}})),
            "config.seed",
        ),
        ("POST", "/api/scenario", Some(json!({"speed": -1})), "speed"),
        (
            "POST",
            "/api/replay",
            Some(json!({"dataset": "/nonexistent/data.jsonl"})),
            "dataset",
        ),
        (
            "POST",
            "/api/models/train",
            Some(json!({"model_type": "svm"})),
            "model_type",
        ),
        (
            "POST",
            "/api/models/train",
            Some(json!({"model_type": "gbm", "config": {"n_rounds": "many"}})),
            "config",
        ),
        (
            "POST",
            "/api/summary",
            Some(json!({"aggregates": [{"op": "sum", "field": "currency"}]})),
            "currency",
        ),
        ("GET", "/api/summary?agg=median:amount_minor", None, "agg"),
        (
            "POST",
            "/api/reports",
            Some(json!({"title": "t", "sections": [{"type": "chart", "chart": {"kind": "pie"}}]})),
            "sections[0]",
        ),
        (
            "POST",
            "/api/annotations",
            Some(json!({"target": {"kind": "transaction", "id": "0x01"}, "key": " ", "value": "v", "author": "a"})),
            "key",
        ),
        ("POST", "/api/working-sets", Some(json!({"name": ""})), "name"),
        ("GET", "/api/stream?kinds=tx_mined,gossip", None, "kinds"),
        ("POST", "/api/rules", None, "body"),
    ];
    for (method, uri, body, field) in cases {
        let reply = call(&app, method, uri, body.as_ref()).await;
        assert_eq!(reply.status.as_u16(), 400, "{method} {uri} {body:?}: {}", reply.text);
        let v = reply.json();
        assert_eq!(v["field"], json!(field), "{method} {uri} {body:?}: {v}");
        assert!(v["error"].as_str().is_some_and(|e| !e.is_empty()));
    }
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let (app, _, _dir) = app_with_alert();
    for uri in [
        "/api/transactions/0xdead",
        "/api/customers/C404/history",
        "/api/models/M-000000000000",
        "/api/models/M-000000000000/metrics",
        "/api/rules/nope",
        "/api/alerts/A-0000000000000000",
        "/api/reports/R-000000000000",
        "/api/working-sets/none",
    ] {
        let reply = call(&app, "GET", uri, None).await;
        assert_eq!(reply.status.as_u16(), 404, "{uri}: {}", reply.text);
        assert_eq!(reply.json()["field"], Value::Null);
    }
    let reply = call(&app, "POST", "/api/models/M-000000000000/activate", None).await;
    assert_eq!(reply.status.as_u16(), 404);
    let reply = call(&app, "DELETE", "/api/rules/nope", None).await;
    assert_eq!(reply.status.as_u16(), 404);
    let body = json!({"target": {"kind": "alert", "id": "A-none"}, "key": "k", "value": "v", "author": "a"});
    let reply = call(&app, "POST", "/api/annotations", Some(&body)).await;
    assert_eq!(reply.status.as_u16(), 404);
}

#[tokio::test]
async fn illegal_transitions_are_409_and_leave_the_alert_alone() {
    let (app, alert_id, _dir) = app_with_alert();
    let uri = format!("/api/alerts/{alert_id}/transition");
    let go = |state: &str| json!({"state": state, "note": state});

    // open cannot jump to escalated
    let reply = call(&app, "POST", &uri, Some(&go("escalated"))).await;
    assert_eq!(reply.status.as_u16(), 409, "{}", reply.text);
    assert_eq!(
        reply.json()["error"],
        json!("illegal alert transition open -> escalated")
    );

    assert_eq!(
        call(&app, "POST", &uri, Some(&go("acknowledged")))
            .await
            .status
            .as_u16(),
        200
    );
    assert_eq!(
        call(&app, "POST", &uri, Some(&go("escalated"))).await.status.as_u16(),
        200
    );
    for to in ["open", "acknowledged", "escalated", "closed"] {
        let reply = call(&app, "POST", &uri, Some(&go(to))).await;
        assert_eq!(reply.status.as_u16(), 409, "escalated -> {to}: {}", reply.text);
    }
    let alert = call(&app, "GET", &format!("/api/alerts/{alert_id}"), None).await.json();
    assert_eq!(alert["state"], json!("escalated"));
    assert_eq!(alert["audit"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn duplicate_rule_is_409() {
    let (app, _, _dir) = app_with_alert();
    let rule = json!({"rule_id": "large-amount", "name": "again", "kind": "amount_threshold", "params": {"min_amount_minor": 5}});
    let reply = call(&app, "POST", "/api/rules", Some(&rule)).await;
    assert_eq!(reply.status.as_u16(), 409);
    assert_eq!(reply.json()["field"], Value::Null);
}
