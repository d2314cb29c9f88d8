//! HTTP interface. Bodies are JSON; errors are `{"error": ..., "field": ...}`
//! with 400 for invalid input, 404 for unknown ids and 409 for conflicts.

use std::collections::{HashSet, VecDeque};
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::Stream;
use remitwatch_core::analytics::{
    dashboard_snapshot, drill_down, field_type, generate_report, run_query, summarize, AggOp, AggregateSpec,
    AnalyticsError, Direction, EntityKind, FieldType, Filter, ModelCard, Op, Query as RecordQuery, ReportSpec,
    SummarySpec, Target, TimeRange, WorkingSet,
};
use remitwatch_core::chainsim::ScenarioConfig;
use remitwatch_core::digest::sha256_hex;
use remitwatch_core::mlcore::workflow::{train_model, WorkflowError};
use remitwatch_core::mlcore::ModelType;
use remitwatch_core::record::parse_timestamp;
use remitwatch_core::riskengine::{Action, AlertRule, AlertState, RuleParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::event::{Event, EventKind};
use crate::runtime::{load_dataset, Service, ServiceError, Speed};

pub type AppState = Arc<Service>;

pub fn router(svc: AppState) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/scenario", post(start_scenario))
        .route("/api/replay", post(start_replay))
        .route("/api/transactions", get(list_transactions))
        .route("/api/transactions/query", post(query_transactions))
        .route("/api/transactions/{tx_hash}", get(get_transaction))
        .route("/api/customers/{id}/history", get(customer_history))
        .route("/api/models", get(list_models))
        .route("/api/models/train", post(train))
        .route("/api/models/{id}", get(get_model))
        .route("/api/models/{id}/metrics", get(get_model_metrics))
        .route("/api/models/{id}/activate", post(activate_model))
        .route("/api/rules", get(list_rules).post(create_rule))
        .route("/api/rules/{id}", put(put_rule).get(get_rule).delete(delete_rule))
        .route("/api/alerts", get(list_alerts))
        .route("/api/alerts/{id}", get(get_alert))
        .route("/api/alerts/{id}/transition", post(transition))
        .route("/api/summary", get(summary_get).post(summary_post))
        .route("/api/reports", post(create_report))
        .route("/api/reports/{id}", get(get_report))
        .route("/api/dashboard", get(dashboard))
        .route("/api/annotations", get(list_annotations).post(add_annotation))
        .route("/api/working-sets", post(create_working_set))
        .route("/api/working-sets/{name}", get(get_working_set))
        .route("/api/stream", get(stream))
        .with_state(svc)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: String,
    field: Option<String>,
}

impl ApiError {
    pub fn invalid(field: impl Into<String>, error: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            error: error.into(),
            field: Some(field.into()),
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            error: format!("{} not found", what.into()),
            field: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.error, "field": self.field}))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, field) = match &e {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, None),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, None),
            ServiceError::Invalid { field, .. } => (StatusCode::BAD_REQUEST, field.clone()),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, None),
        };
        ApiError {
            status,
            error: e.to_string(),
            field,
        }
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let field = match &e {
            AnalyticsError::UnknownField(f) => f.clone(),
            AnalyticsError::BadOperator { field, .. }
            | AnalyticsError::BadValue { field, .. }
            | AnalyticsError::TypeMismatch { field, .. } => field.clone(),
            AnalyticsError::LimitTooLarge(_) => "limit".into(),
            // section names start with `#<index>`
            AnalyticsError::InvalidSpec { section, .. } => {
                match section.strip_prefix('#').and_then(|r| r.split(' ').next()) {
                    Some(i) => format!("sections[{i}]"),
                    None => "sections".into(),
                }
            }
            AnalyticsError::UnknownCustomer(_) | AnalyticsError::TargetNotFound { .. } => {
                return ApiError {
                    status: StatusCode::NOT_FOUND,
                    error: e.to_string(),
                    field: None,
                }
            }
            AnalyticsError::EmptySeries | AnalyticsError::DegenerateAbscissa => "series".into(),
        };
        ApiError::invalid(field, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body whose decode errors name the offending field.
pub struct JsonBody<T>(pub T);

/// A missing field is reported at its parent's path with the name only in
/// the message text.
fn field_from_message(path: &str, msg: &str) -> String {
    let missing = msg
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next());
    match (path, missing) {
        (".", Some(n)) => n.to_string(),
        (".", None) => "body".to_string(),
        (p, Some(n)) => format!("{p}.{n}"),
        (p, None) => p.to_string(),
    }
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let msg = e.inner().to_string();
        ApiError::invalid(field_from_message(&e.path().to_string(), &msg), msg)
    })
}

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::invalid("body", e.to_string()))?;
        decode(&bytes).map(JsonBody)
    }
}

/// Query-string extractor with the same error shape as [`JsonBody`].
pub struct QueryParams<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for QueryParams<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        match Query::<T>::from_request_parts(parts, state).await {
            Ok(Query(v)) => Ok(QueryParams(v)),
            Err(e) => {
                let msg = e.body_text();
                // serde names the parameter between backticks when it can
                let field = msg.split('`').nth(1).unwrap_or("query").to_string();
                Err(ApiError::invalid(field, msg))
            }
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::from(ServiceError::Internal(e.to_string())))?
}

async fn status(State(svc): State<AppState>) -> Json<Value> {
    let store = svc.read();
    Json(json!({
        "seq": store.seq(),
        "transactions": store.records().len(),
        "scored": store.scores().len(),
        "alerts": store.alerts().count(),
        "active_model": store.active_model().map(|(id, _)| id),
        "busy": svc.is_busy(),
        "snapshot_hash": store.snapshot_hash(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRequest {
    /// Merged over the reference scenario.
    #[serde(default)]
    config: Option<Value>,
    #[serde(default)]
    blocks: Option<u64>,
    #[serde(default)]
    speed: Speed,
    /// Run to completion before answering.
    #[serde(default)]
    wait: bool,
}

fn merged_scenario(overrides: Option<Value>) -> ApiResult<ScenarioConfig> {
    let mut base = serde_json::to_value(ScenarioConfig::default()).expect("configs serialize");
    match overrides {
        None | Some(Value::Null) => {}
        Some(Value::Object(o)) => {
            let obj = base.as_object_mut().expect("object");
            for (k, v) in o {
                obj.insert(k, v);
            }
        }
        Some(_) => return Err(ApiError::invalid("config", "expected an object")),
    }
    let cfg: ScenarioConfig = decode(base.to_string().as_bytes()).map_err(|e| ApiError {
        field: e.field.map(|f| format!("config.{f}")),
        ..e
    })?;
    cfg.validate().map_err(|e| ApiError::invalid("config", e.to_string()))?;
    Ok(cfg)
}

async fn run_job<T: Serialize + Send + 'static>(
    svc: AppState,
    wait: bool,
    mut body: Value,
    job: impl FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<Response> {
    if svc.is_busy() {
        return Err(ServiceError::Conflict("a simulation or replay is already running".into()).into());
    }
    if wait {
        let out = blocking(move || job(&svc).map_err(ApiError::from)).await?;
        body["status"] = json!("done");
        body["outcome"] = serde_json::to_value(out).expect("outcomes serialize");
        Ok((StatusCode::OK, Json(body)).into_response())
    } else {
        tokio::task::spawn_blocking(move || {
            if let Err(e) = job(&svc) {
                tracing::error!("background job failed: {e}");
            }
        });
        body["status"] = json!("running");
        Ok((StatusCode::ACCEPTED, Json(body)).into_response())
    }
}

async fn start_scenario(State(svc): State<AppState>, JsonBody(req): JsonBody<ScenarioRequest>) -> ApiResult<Response> {
    let cfg = merged_scenario(req.config)?;
    let blocks = req.blocks.unwrap_or_else(|| cfg.default_block_count());
    let scenario_id = format!(
        "S-{}",
        &sha256_hex(serde_json::to_vec(&cfg).expect("configs serialize"))[..12]
    );
    let body = json!({"scenario_id": scenario_id, "blocks": blocks});
    run_job(svc, req.wait, body, move |s| s.run_scenario(cfg, blocks, req.speed)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplayRequest {
    dataset: String,
    #[serde(default)]
    speed: Speed,
    #[serde(default)]
    wait: bool,
}

async fn start_replay(State(svc): State<AppState>, JsonBody(req): JsonBody<ReplayRequest>) -> ApiResult<Response> {
    let (_, records) = load_dataset(std::path::Path::new(&req.dataset))?;
    let body = json!({"dataset": req.dataset, "records": records.len(), "speed": req.speed});
    run_job(svc, req.wait, body, move |s| s.replay_records(records, req.speed)).await
}

fn parse_time(field: &str, v: &str) -> ApiResult<chrono::DateTime<chrono::Utc>> {
    parse_timestamp(v).ok_or_else(|| ApiError::invalid(field, format!("`{v}` is not an ISO-8601 timestamp")))
}

fn filter_value(field: &str, op: Op, raw: &str) -> Value {
    let text = matches!(field_type(field), Ok(FieldType::Text));
    let one = |s: &str| {
        if text {
            Value::String(s.to_string())
        } else {
            serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
        }
    };
    if op == Op::In {
        Value::Array(raw.split(',').map(one).collect())
    } else {
        one(raw)
    }
}

/// Builds a query from `filter=field:op:value` (repeatable), `from`, `to`,
/// `sort`, `direction`, `limit` and `offset`. Unrecognised keys are left
/// for the caller.
fn query_from_params(params: &[(String, String)]) -> ApiResult<(RecordQuery, Vec<(String, String)>)> {
    let mut q = RecordQuery::default();
    let mut rest = Vec::new();
    for (k, v) in params {
        match k.as_str() {
            "filter" => {
                let mut parts = v.splitn(3, ':');
                let (Some(field), Some(op), Some(raw)) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(ApiError::invalid("filter", format!("`{v}` is not field:op:value")));
                };
                let op: Op = serde_json::from_value(Value::String(op.to_string()))
                    .map_err(|_| ApiError::invalid(field, format!("unknown operator `{op}`")))?;
                q.filters.push(Filter {
                    field: field.to_string(),
                    op,
                    value: filter_value(field, op, raw),
                });
            }
            "from" => q.time_range.from = Some(parse_time("from", v)?),
            "to" => q.time_range.to = Some(parse_time("to", v)?),
            "sort" => q.sort.field = v.clone(),
            "direction" => {
                q.sort.direction = match v.as_str() {
                    "asc" => Direction::Asc,
                    "desc" => Direction::Desc,
                    _ => return Err(ApiError::invalid("direction", "expected asc or desc")),
                }
            }
            "limit" => {
                q.limit = v
                    .parse()
                    .map_err(|_| ApiError::invalid("limit", "expected a non-negative integer"))?
            }
            "offset" => {
                q.offset = v
                    .parse()
                    .map_err(|_| ApiError::invalid("offset", "expected a non-negative integer"))?
            }
            _ => rest.push((k.clone(), v.clone())),
        }
    }
    Ok((q, rest))
}

fn reject_unknown(rest: &[(String, String)]) -> ApiResult<()> {
    match rest.first() {
        Some((k, _)) => Err(ApiError::invalid(k.clone(), format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

async fn list_transactions(
    State(svc): State<AppState>,
    QueryParams(params): QueryParams<Vec<(String, String)>>,
) -> ApiResult<Response> {
    let (q, rest) = query_from_params(&params)?;
    reject_unknown(&rest)?;
    run_record_query(&svc, &q)
}

async fn query_transactions(State(svc): State<AppState>, JsonBody(q): JsonBody<RecordQuery>) -> ApiResult<Response> {
    run_record_query(&svc, &q)
}

fn run_record_query(svc: &Service, q: &RecordQuery) -> ApiResult<Response> {
    let store = svc.read();
    let page = run_query(store.records(), store.scores(), q)?;
    Ok(Json(page).into_response())
}

async fn get_transaction(State(svc): State<AppState>, Path(hash): Path<String>) -> ApiResult<Json<Value>> {
    let store = svc.read();
    let record = store
        .record(&hash)
        .ok_or_else(|| ApiError::not_found(format!("transaction `{hash}`")))?;
    Ok(Json(json!({
        "record": record,
        "score": store.scores().get(&hash),
        "alerts": store.alerts_for(&hash),
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeParams {
    from: Option<String>,
    to: Option<String>,
}

async fn customer_history(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    QueryParams(p): QueryParams<RangeParams>,
) -> ApiResult<Response> {
    let range = TimeRange {
        from: p.from.as_deref().map(|v| parse_time("from", v)).transpose()?,
        to: p.to.as_deref().map(|v| parse_time("to", v)).transpose()?,
    };
    let store = svc.read();
    if !store.has_customer(&id) {
        return Err(ApiError::not_found(format!("customer `{id}`")));
    }
    Ok(Json(drill_down(store.records(), &id, &range)?).into_response())
}

async fn list_models(State(svc): State<AppState>) -> Json<Value> {
    let store = svc.read();
    let active = store.active_model().map(|(id, _)| id.to_string());
    let models: Vec<Value> = store
        .models()
        .iter()
        .map(|(id, a)| {
            json!({
                "model_id": id,
                "model_type": a.model_type(),
                "active": active.as_deref() == Some(id.as_str()),
                "trained_at": a.train_meta.timestamp,
            })
        })
        .collect();
    Json(Value::Array(models))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    model_type: ModelType,
    #[serde(default)]
    config: Value,
    /// `store` (the default) or the path of an exported dataset.
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default)]
    activate: bool,
}

async fn train(State(svc): State<AppState>, JsonBody(req): JsonBody<TrainRequest>) -> ApiResult<Response> {
    let (records, corridors) = match req.dataset.as_deref() {
        None | Some("store") => (svc.read().records().to_vec(), svc.corridors()),
        Some(path) => {
            let (cfg, records) = load_dataset(std::path::Path::new(path))?;
            (
                records,
                remitwatch_core::pipeline::features::CorridorTable::from_corridors(&cfg.corridors),
            )
        }
    };
    let model_type = req.model_type;
    let hyper = req.config;
    let s = svc.clone();
    let (model_id, artifact) = blocking(move || {
        let artifact = train_model(&records, &corridors, model_type, &hyper).map_err(|e| match e {
            WorkflowError::Config(m) => ApiError::invalid("config", m),
            other => ApiError::invalid("dataset", other.to_string()),
        })?;
        let id = s.register_model(artifact.clone(), req.activate)?;
        Ok((id, artifact))
    })
    .await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "model_id": model_id,
            "model_type": artifact.model_type(),
            "active": req.activate,
            "metrics": artifact.metrics,
        })),
    )
        .into_response())
}

async fn get_model(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = svc.read();
    let a = store
        .models()
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("model `{id}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], a.to_json()).into_response())
}

async fn get_model_metrics(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = svc.read();
    let a = store
        .models()
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("model `{id}`")))?;
    let m = a
        .metrics
        .as_ref()
        .ok_or_else(|| ApiError::not_found(format!("metrics of model `{id}`")))?;
    Ok(Json(m).into_response())
}

async fn activate_model(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    svc.activate_model(&id)?;
    Ok(Json(json!({"model_id": id, "active": true})))
}

async fn list_rules(State(svc): State<AppState>) -> Json<Vec<AlertRule>> {
    Json(svc.ruleset().rules)
}

async fn get_rule(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AlertRule>> {
    svc.ruleset()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("rule `{id}`")))
}

/// Rule bodies decode in two steps because `#[serde(flatten)]` hides the
/// path of any error inside the tagged parameters.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleBody {
    rule_id: String,
    name: String,
    kind: String,
    #[serde(default)]
    params: Value,
    #[serde(default = "enabled_default")]
    enabled: bool,
    #[serde(default)]
    actions: Vec<Action>,
}

fn enabled_default() -> bool {
    true
}

const RULE_KINDS: [&str; 5] = [
    "amount_threshold",
    "velocity",
    "structuring",
    "score_threshold",
    "anomaly",
];

impl RuleBody {
    fn into_rule(self) -> ApiResult<AlertRule> {
        if !RULE_KINDS.contains(&self.kind.as_str()) {
            return Err(ApiError::invalid(
                "kind",
                format!(
                    "unknown rule kind `{}`, expected one of {}",
                    self.kind,
                    RULE_KINDS.join(", ")
                ),
            ));
        }
        let tagged = json!({"kind": self.kind, "params": self.params});
        let params: RuleParams = decode(tagged.to_string().as_bytes()).map_err(|e| ApiError {
            field: Some(match e.field.as_deref() {
                Some(f) if f.starts_with("params") => f.to_string(),
                Some("body") | None => "params".to_string(),
                Some(f) => format!("params.{f}"),
            }),
            ..e
        })?;
        Ok(AlertRule {
            rule_id: self.rule_id,
            name: self.name,
            params,
            enabled: self.enabled,
            actions: self.actions,
        })
    }
}

async fn create_rule(State(svc): State<AppState>, JsonBody(body): JsonBody<RuleBody>) -> ApiResult<Response> {
    let rule = svc.create_rule(body.into_rule()?)?;
    Ok((StatusCode::CREATED, Json(rule)).into_response())
}

async fn put_rule(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<RuleBody>,
) -> ApiResult<Json<AlertRule>> {
    let rule = body.into_rule()?;
    if rule.rule_id != id {
        return Err(ApiError::invalid(
            "rule_id",
            format!("body rule_id `{}` differs from path `{id}`", rule.rule_id),
        ));
    }
    Ok(Json(svc.upsert_rule(rule)?))
}

async fn delete_rule(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    svc.delete_rule(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlertParams {
    state: Option<String>,
    rule_id: Option<String>,
    customer_id: Option<String>,
}

async fn list_alerts(State(svc): State<AppState>, QueryParams(p): QueryParams<AlertParams>) -> ApiResult<Response> {
    let state: Option<AlertState> = p
        .state
        .as_deref()
        .map(|s| s.parse().map_err(|e: String| ApiError::invalid("state", e)))
        .transpose()?;
    let store = svc.read();
    let alerts: Vec<_> = store
        .alerts()
        .filter(|a| state.is_none_or(|s| a.state == s))
        .filter(|a| p.rule_id.as_ref().is_none_or(|r| &a.rule_id == r))
        .filter(|a| p.customer_id.as_ref().is_none_or(|c| &a.customer_id == c))
        .collect();
    Ok(Json(alerts).into_response())
}

async fn get_alert(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = svc.read();
    let a = store
        .alert(&id)
        .ok_or_else(|| ApiError::not_found(format!("alert `{id}`")))?;
    Ok(Json(a).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRequest {
    state: AlertState,
    #[serde(default)]
    note: String,
}

async fn transition(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<TransitionRequest>,
) -> ApiResult<Response> {
    let a = svc.transition_alert(&id, req.state, &req.note)?;
    Ok(Json(a).into_response())
}

fn parse_agg(s: &str) -> ApiResult<AggregateSpec> {
    let (op, field) = match s.split_once(':') {
        Some((op, f)) => (op, Some(f)),
        None => (s, None),
    };
    let op: AggOp = serde_json::from_value(Value::String(op.to_string()))
        .map_err(|_| ApiError::invalid("agg", format!("unknown aggregate `{op}`")))?;
    Ok(AggregateSpec::new(op, field))
}

/// `group_by=a,b&agg=count,sum:amount_minor` plus the transaction filters.
async fn summary_get(
    State(svc): State<AppState>,
    QueryParams(params): QueryParams<Vec<(String, String)>>,
) -> ApiResult<Response> {
    let (q, rest) = query_from_params(&params)?;
    let mut spec = SummarySpec {
        filters: q.filters,
        time_range: q.time_range,
        ..SummarySpec::default()
    };
    for (k, v) in rest {
        match k.as_str() {
            "group_by" => spec
                .group_by
                .extend(v.split(',').filter(|s| !s.is_empty()).map(str::to_string)),
            "agg" => {
                for a in v.split(',').filter(|s| !s.is_empty()) {
                    spec.aggregates.push(parse_agg(a)?);
                }
            }
            _ => return Err(ApiError::invalid(k.clone(), format!("unknown parameter `{k}`"))),
        }
    }
    let store = svc.read();
    Ok(Json(summarize(store.records(), store.scores(), &spec)?).into_response())
}

async fn summary_post(State(svc): State<AppState>, JsonBody(spec): JsonBody<SummarySpec>) -> ApiResult<Response> {
    let store = svc.read();
    Ok(Json(summarize(store.records(), store.scores(), &spec)?).into_response())
}

async fn create_report(State(svc): State<AppState>, JsonBody(spec): JsonBody<ReportSpec>) -> ApiResult<Response> {
    let report = {
        let store = svc.read();
        generate_report(store.records(), store.scores(), &spec)?
    };
    let id = svc.save_report(report)?;
    Ok((StatusCode::CREATED, Json(json!({"report_id": id}))).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportParams {
    format: Option<String>,
}

async fn get_report(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    QueryParams(p): QueryParams<ReportParams>,
) -> ApiResult<Response> {
    let report = svc
        .report(&id)
        .ok_or_else(|| ApiError::not_found(format!("report `{id}`")))?;
    match p.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("markdown") => Ok((
            [(header::CONTENT_TYPE, "text/markdown; charset=utf-8")],
            report.to_markdown(),
        )
            .into_response()),
        Some(f) => Err(ApiError::invalid("format", format!("unknown format `{f}`"))),
    }
}

async fn dashboard(State(svc): State<AppState>) -> Response {
    let store = svc.read();
    let alerts: Vec<_> = store.alerts().cloned().collect();
    let model = store.active_model().map(|(id, a)| ModelCard {
        model_id: id.to_string(),
        model_type: a.model_type().to_string(),
        metrics: a.metrics.clone(),
    });
    Json(dashboard_snapshot(store.records(), store.scores(), &alerts, model)).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRequest {
    target: Target,
    key: String,
    value: String,
    author: String,
}

async fn add_annotation(
    State(svc): State<AppState>,
    JsonBody(req): JsonBody<AnnotationRequest>,
) -> ApiResult<Response> {
    if req.key.trim().is_empty() {
        return Err(ApiError::invalid("key", "must be non-empty"));
    }
    let a = svc.annotate(req.target, &req.key, &req.value, &req.author)?;
    Ok((StatusCode::CREATED, Json(a)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationParams {
    kind: Option<EntityKind>,
    id: Option<String>,
}

async fn list_annotations(State(svc): State<AppState>, QueryParams(p): QueryParams<AnnotationParams>) -> Response {
    let store = svc.read();
    let list: Vec<_> = store
        .annotations()
        .iter()
        .filter(|a| p.kind.is_none_or(|k| a.target.kind == k))
        .filter(|a| p.id.as_ref().is_none_or(|i| &a.target.id == i))
        .collect();
    Json(list).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkingSetRequest {
    name: String,
    #[serde(default)]
    query: RecordQuery,
}

async fn create_working_set(
    State(svc): State<AppState>,
    JsonBody(req): JsonBody<WorkingSetRequest>,
) -> ApiResult<Response> {
    if req.name.trim().is_empty() {
        return Err(ApiError::invalid("name", "must be non-empty"));
    }
    let ws = {
        let store = svc.read();
        WorkingSet::create(&req.name, req.query, store.records(), store.scores(), svc.now())?
    };
    let body = json!({
        "name": ws.name(),
        "records": ws.records().len(),
        "content_hash": ws.content_hash(),
    });
    svc.save_working_set(ws)?;
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_working_set(State(svc): State<AppState>, Path(name): Path<String>) -> ApiResult<Response> {
    let ws = svc
        .working_set(&name)
        .ok_or_else(|| ApiError::not_found(format!("working set `{name}`")))?;
    Ok(Json(ws).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamParams {
    /// Comma-separated event kinds; all kinds when absent.
    kinds: Option<String>,
    /// Same as the Last-Event-ID header, for clients that cannot set it.
    last_event_id: Option<u64>,
}

struct StreamState {
    svc: AppState,
    rx: tokio::sync::broadcast::Receiver<Arc<Event>>,
    queue: VecDeque<Arc<Event>>,
    last: u64,
    kinds: Option<HashSet<EventKind>>,
}

fn sse_event(ev: &Event) -> SseEvent {
    SseEvent::default()
        .event(ev.kind().as_str())
        .id(ev.seq.to_string())
        .data(ev.to_line())
}

/// Backlog after the resume point, then live events; each sequence number
/// is sent at most once per connection.
pub fn event_stream(
    svc: AppState,
    last: u64,
    kinds: Option<HashSet<EventKind>>,
) -> impl Stream<Item = Result<SseEvent, Infallible>> + Send {
    // subscribe before reading the backlog so nothing falls in between
    let rx = svc.subscribe();
    let queue = svc.events_after(last).into();
    let st = StreamState {
        svc,
        rx,
        queue,
        last,
        kinds,
    };
    futures::stream::unfold(st, |mut st| async move {
        loop {
            if let Some(ev) = st.queue.pop_front() {
                if ev.seq <= st.last {
                    continue;
                }
                st.last = ev.seq;
                if st.kinds.as_ref().is_none_or(|k| k.contains(&ev.kind())) {
                    return Some((Ok(sse_event(&ev)), st));
                }
                continue;
            }
            match st.rx.recv().await {
                Ok(ev) => st.queue.push_back(ev),
                Err(RecvError::Lagged(_)) => {
                    let missed = st.svc.events_after(st.last);
                    st.queue.extend(missed);
                }
                Err(RecvError::Closed) => return None,
            }
        }
    })
}

async fn stream(
    State(svc): State<AppState>,
    headers: HeaderMap,
    QueryParams(p): QueryParams<StreamParams>,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let header_id = match headers.get("last-event-id") {
        Some(v) => Some(
            v.to_str()
                .ok()
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| ApiError::invalid("Last-Event-ID", "expected a sequence number"))?,
        ),
        None => None,
    };
    let last = header_id.or(p.last_event_id).unwrap_or(0);
    let kinds = match p.kinds {
        None => None,
        Some(s) => Some(
            s.split(',')
                .filter(|k| !k.is_empty())
                .map(|k| k.parse::<EventKind>().map_err(|e| ApiError::invalid("kinds", e)))
                .collect::<ApiResult<HashSet<_>>>()?,
        ),
    };
    let heartbeat = svc.heartbeat();
    Ok(Sse::new(event_stream(svc, last, kinds)).keep_alive(KeepAlive::new().interval(heartbeat).text("heartbeat")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use remitwatch_core::analytics::Sort;

    #[test]
    fn missing_field_is_named() {
        let e = decode::<TransitionRequest>(br#"{"note": "x"}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("state"));
        let e = decode::<TransitionRequest>(br#"{"state": "reopened"}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("state"));
        let e = decode::<TransitionRequest>(br#"{"state": "closed", "extra": 1}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("extra"));
    }

    #[test]
    fn filters_from_query_string() {
        let params = vec![
            ("filter".to_string(), "amount_minor:>=:100".to_string()),
            ("filter".to_string(), "currency:in:USD,EUR".to_string()),
            ("filter".to_string(), "timestamp:<:2023-01-01T01:00:00Z".to_string()),
            ("limit".to_string(), "5".to_string()),
        ];
        let (q, rest) = query_from_params(&params).unwrap();
        assert!(rest.is_empty());
        assert_eq!(q.limit, 5);
        assert_eq!(q.filters[0].value, json!(100));
        assert_eq!(q.filters[1].value, json!(["USD", "EUR"]));
        assert_eq!(q.filters[2].value, json!("2023-01-01T01:00:00Z"));
        assert_eq!(q.sort, Sort::default());
    }
}
