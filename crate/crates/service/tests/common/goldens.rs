//! Walks every endpoint against a fixed fixture and compares each response
//! with a recorded golden under `tests/golden/api`.

use std::path::{Path, PathBuf};

use axum::Router;
use remitwatch::api::router;
use remitwatch_core::chainsim::ScenarioConfig;
use serde_json::{json, Value};

use super::{call, export, open, Reply};

struct Walk {
    app: Router,
    tmp: String,
    step: usize,
    bless: bool,
    failures: Vec<String>,
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/api")
}

/// Timing fields vary run to run.
fn redact(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                if k == "elapsed_seconds" || k == "tx_per_second" {
                    *x = Value::Null;
                } else {
                    redact(x);
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(redact),
        _ => {}
    }
}

impl Walk {
    async fn step(&mut self, name: &str, method: &str, uri: &str, body: Option<Value>, status: u16) -> Reply {
        self.step_shaped(name, method, uri, body, status, |v| v).await
    }

    /// `shape` reduces bodies too large to keep verbatim.
    async fn step_shaped(
        &mut self,
        name: &str,
        method: &str,
        uri: &str,
        body: Option<Value>,
        status: u16,
        shape: impl Fn(Value) -> Value,
    ) -> Reply {
        self.step += 1;
        let reply = call(&self.app, method, uri, body.as_ref()).await;
        assert_eq!(reply.status.as_u16(), status, "{method} {uri}: {}", reply.text);
        let text = reply.text.replace(&self.tmp, "<tmp>");
        let mut recorded = if reply.content_type.starts_with("application/json") {
            let mut v: Value = serde_json::from_str(&text).unwrap();
            redact(&mut v);
            shape(v)
        } else {
            Value::String(text)
        };
        if recorded == Value::String(String::new()) {
            recorded = Value::Null;
        }
        let doc = json!({
            "request": {"method": method, "uri": uri.replace(&self.tmp, "<tmp>"), "body": body.map(|b| serde_json::from_str::<Value>(&b.to_string().replace(&self.tmp, "<tmp>")).unwrap())},
            "status": status,
            "content_type": reply.content_type,
            "body": recorded,
        });
        let path = golden_dir().join(format!("{:02}-{name}.json", self.step));
        if self.bless {
            std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
        } else {
            match std::fs::read_to_string(&path) {
                Ok(s) => {
                    let want: Value = serde_json::from_str(&s).unwrap();
                    if want != doc {
                        self.failures.push(format!(
                            "{} differs:\n{}",
                            path.display(),
                            serde_json::to_string_pretty(&doc).unwrap()
                        ));
                    }
                }
                Err(e) => self.failures.push(format!("{}: {e}", path.display())),
            }
        }
        reply
    }
}

/// Runs the walk and returns the mismatches; with `bless` the goldens are
/// rewritten instead.
pub async fn walk(bless: bool) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("replay.jsonl");
    export(
        ScenarioConfig {
            seed: 11,
            ..ScenarioConfig::default()
        },
        120,
        &dataset,
    );
    let svc = open(&dir.path().join("data"));
    let mut w = Walk {
        app: router(svc),
        tmp: dir.path().display().to_string(),
        step: 0,
        bless,
        failures: Vec::new(),
    };
    if w.bless {
        std::fs::create_dir_all(golden_dir()).unwrap();
        for f in std::fs::read_dir(golden_dir()).unwrap() {
            std::fs::remove_file(f.unwrap().path()).unwrap();
        }
    }

    w.step("status-empty", "GET", "/api/status", None, 200).await;
    w.step("rules-default", "GET", "/api/rules", None, 200).await;
    w.step(
        "scenario-run",
        "POST",
        "/api/scenario",
        Some(json!({"config": {"seed": 3, "fraud_rate": 0.05}, "blocks": 1200, "wait": true})),
        200,
    )
    .await;
    let trained = w
        .step(
            "model-train",
            "POST",
            "/api/models/train",
            Some(json!({"model_type": "gbm", "config": {"n_rounds": 40}, "activate": true})),
            201,
        )
        .await
        .json();
    let model_id = trained["model_id"].as_str().unwrap().to_string();
    w.step("models-list", "GET", "/api/models", None, 200).await;
    w.step_shaped("model-get", "GET", &format!("/api/models/{model_id}"), None, 200, |v| {
        // the tree dump is large; keep the envelope
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        json!({"keys": keys, "model_type": v["model_type"], "feature_schema_hash": v["feature_schema_hash"], "hyperparameters": v["hyperparameters"]})
    })
    .await;
    w.step(
        "model-metrics",
        "GET",
        &format!("/api/models/{model_id}/metrics"),
        None,
        200,
    )
    .await;
    w.step(
        "model-activate",
        "POST",
        &format!("/api/models/{model_id}/activate"),
        None,
        200,
    )
    .await;
    let replay = w
        .step(
            "replay",
            "POST",
            "/api/replay",
            Some(json!({"dataset": dataset.display().to_string(), "wait": true})),
            200,
        )
        .await
        .json();

    let top = w
        .step(
            "transactions-get",
            "GET",
            "/api/transactions?filter=amount_minor:%3E=:500000&filter=currency:in:USD,EUR&sort=amount_minor&direction=desc&limit=3",
            None,
            200,
        )
        .await
        .json();
    let amounts: Vec<u64> = top["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["amount_minor"].as_u64().unwrap())
        .collect();
    assert!(
        amounts.windows(2).all(|p| p[0] >= p[1]) && amounts.iter().all(|a| *a >= 500_000),
        "{amounts:?}"
    );
    let hash = top["records"][0]["tx_hash"].as_str().unwrap().to_string();
    w.step(
        "transactions-query",
        "POST",
        "/api/transactions/query",
        Some(json!({"filters": [{"field": "probability", "op": ">=", "value": 0.3}], "sort": {"field": "probability", "direction": "desc"}, "limit": 2})),
        200,
    )
    .await;
    let detail = w
        .step("transaction", "GET", &format!("/api/transactions/{hash}"), None, 200)
        .await
        .json();
    let customer = detail["record"]["sender_id"].as_str().unwrap().to_string();
    w.step(
        "customer-history",
        "GET",
        &format!("/api/customers/{customer}/history?from=2023-01-01T00:00:00Z&to=2023-01-01T02:00:00Z"),
        None,
        200,
    )
    .await;

    let alerts = w
        .step(
            "alerts-filtered",
            "GET",
            &format!("/api/alerts?customer_id={customer}&rule_id=large-amount&state=open"),
            None,
            200,
        )
        .await
        .json();
    let alert_id = alerts[0]["alert_id"].as_str().unwrap().to_string();
    w.step("alert", "GET", &format!("/api/alerts/{alert_id}"), None, 200)
        .await;
    w.step(
        "alert-acknowledge",
        "POST",
        &format!("/api/alerts/{alert_id}/transition"),
        Some(json!({"state": "acknowledged", "note": "checking the source of funds"})),
        200,
    )
    .await;
    w.step(
        "alert-reopen-refused",
        "POST",
        &format!("/api/alerts/{alert_id}/transition"),
        Some(json!({"state": "open"})),
        409,
    )
    .await;

    let rule = json!({
        "rule_id": "night-owl",
        "name": "Five transfers in ten minutes",
        "kind": "velocity",
        "params": {"max_tx": 5, "window_seconds": 600},
        "actions": ["notify-stream"]
    });
    w.step("rule-create", "POST", "/api/rules", Some(rule.clone()), 201)
        .await;
    w.step("rule-create-duplicate", "POST", "/api/rules", Some(rule.clone()), 409)
        .await;
    let mut changed = rule.clone();
    changed["params"]["max_tx"] = json!(3);
    changed["enabled"] = json!(false);
    w.step("rule-update", "PUT", "/api/rules/night-owl", Some(changed), 200)
        .await;
    w.step("rule-get", "GET", "/api/rules/night-owl", None, 200).await;
    w.step("rule-delete", "DELETE", "/api/rules/night-owl", None, 204).await;
    w.step("rule-get-deleted", "GET", "/api/rules/night-owl", None, 404)
        .await;

    let by_currency = w
        .step(
            "summary-get",
            "GET",
            "/api/summary?group_by=currency&agg=count,sum:amount_minor,mean:probability",
            None,
            200,
        )
        .await
        .json();
    w.step(
        "summary-post",
        "POST",
        "/api/summary",
        Some(json!({
            "group_by": ["label"],
            "aggregates": [{"op": "count"}, {"op": "sum", "field": "fee_minor"}, {"op": "max", "field": "timestamp"}],
            "calculated": [{"name": "fee_per_tx", "expr": {"div": [{"col": "sum_fee_minor"}, {"col": "count"}]}}]
        })),
        200,
    )
    .await;

    let created = w
        .step(
            "report-create",
            "POST",
            "/api/reports",
            Some(json!({
                "title": "Corridor review",
                "sections": [
                    {"type": "text", "text": "Volumes by corridor and risk tier."},
                    {"type": "summary", "title": "By corridor", "spec": {"group_by": ["corridor"], "aggregates": [{"op": "count"}, {"op": "sum", "field": "amount_minor"}]}},
                    {"type": "chart", "chart": {"kind": "pie", "title": "Tiers", "category": "tier"}},
                    {"type": "chart", "chart": {"kind": "line", "title": "Hourly volume", "bucket_seconds": 3600}}
                ]
            })),
            201,
        )
        .await
        .json();
    let report_id = created["report_id"].as_str().unwrap().to_string();
    w.step("report-json", "GET", &format!("/api/reports/{report_id}"), None, 200)
        .await;
    w.step(
        "report-markdown",
        "GET",
        &format!("/api/reports/{report_id}?format=markdown"),
        None,
        200,
    )
    .await;
    w.step("dashboard", "GET", "/api/dashboard", None, 200).await;

    w.step(
        "annotation-add",
        "POST",
        "/api/annotations",
        Some(json!({"target": {"kind": "transaction", "id": hash}, "key": "reviewed", "value": "yes", "author": "analyst"})),
        201,
    )
    .await;
    w.step("annotations", "GET", "/api/annotations?kind=transaction", None, 200)
        .await;
    w.step(
        "working-set-create",
        "POST",
        "/api/working-sets",
        Some(json!({"name": "high-risk", "query": {"filters": [{"field": "tier", "op": "in", "value": ["medium", "high"]}], "limit": 5}})),
        201,
    )
    .await;
    w.step("working-set", "GET", "/api/working-sets/high-risk", None, 200)
        .await;
    let status = w.step("status-final", "GET", "/api/status", None, 200).await.json();

    // acknowledge, three rule changes and one annotation after the replay
    assert_eq!(
        status["seq"].as_u64().unwrap(),
        replay["outcome"]["seq"].as_u64().unwrap() + 5
    );
    let grouped: u64 = by_currency["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["count"].as_u64().unwrap())
        .sum();
    assert_eq!(grouped, status["transactions"].as_u64().unwrap());

    w.failures
}
