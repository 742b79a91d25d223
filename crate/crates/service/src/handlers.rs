use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::Json;
use causeway_core::discovery::{discover, DiscoveryConfig};
use causeway_core::effects::{counterfactual_validate, default_levels, predict_intervention, CounterfactualOptions, CounterfactualSpec};
use causeway_core::knowledge::{annotate_graph, load_ontology, EditOp, GraphEdit};
use causeway_core::memory::{MemoryKind, RecallFilter};
use causeway_core::model::{load_dataset, select_features, FeatureRequest, LoadOptions};
use causeway_core::qa::{ask, QaState};
use causeway_core::rca::{detect_deviations, fit_tolerances, most_deviant_variable, rank_root_causes, ToleranceSpec};
use causeway_core::replay::{ReplayEvent, ReplayPlan};
use causeway_core::stats::quantile;
use causeway_core::CausalGraph;
use futures::stream::{self, Stream};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;

use crate::error::{ApiError, ApiResult};
use crate::replay;
use crate::state::{AppState, Job, JobStatus};

/// Parses a JSON body by hand so every schema problem is a 400 with our error shape.
/// An empty body parses as `T::default()` when `allow_empty` is set.
fn parse_body<T: DeserializeOwned + Default>(body: &Bytes, allow_empty: bool) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return if allow_empty { Ok(T::default()) } else { Err(ApiError::schema("request body is empty")) };
    }
    serde_json::from_slice(body).map_err(|e| ApiError::schema(format!("invalid request body: {e}")))
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::schema(format!("invalid request body: {e}")))
}

fn now_secs() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

async fn remember(state: &AppState, payload: Value) {
    if let Some(store) = state.memory.lock().await.as_mut() {
        if let Err(e) = store.record_event(MemoryKind::Episodic, payload) {
            tracing::warn!("memory write failed: {e}");
        }
    }
}

pub async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetQuery {
    pub name: Option<String>,
    pub delimiter: Option<char>,
    pub cycle_state_column: Option<String>,
    pub anomaly_label_column: Option<String>,
    pub timestamp_column: Option<String>,
}

pub async fn upload_dataset(
    State(state): State<AppState>,
    Query(q): Query<DatasetQuery>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let mut opts = LoadOptions::default();
    if let Some(c) = q.delimiter {
        if !c.is_ascii() {
            return Err(ApiError::schema("delimiter must be a single ASCII character"));
        }
        opts.delimiter = c as u8;
    }
    if let Some(c) = q.cycle_state_column {
        opts.cycle_state_column = c;
    }
    if let Some(c) = q.anomaly_label_column {
        opts.anomaly_label_column = c;
    }
    if let Some(c) = q.timestamp_column {
        opts.timestamp_column = c;
    }
    let loaded = load_dataset(&body[..], &opts)?;
    let d = loaded.dataset;
    let summary = json!({
        "name": q.name.clone().unwrap_or_else(|| "dataset".into()),
        "rows": d.rows(),
        "variables": d.variables(),
        "dropped_rows": loaded.dropped,
        "has_cycle_state": d.cycle_state().is_some(),
        "has_anomaly_labels": d.anomaly_labels().is_some(),
        "has_timestamps": d.timestamps().is_some(),
    });
    let mut s = state.session.write().await;
    s.dataset = Some(Arc::new(d));
    s.dataset_name = q.name;
    s.features = None;
    Ok((StatusCode::CREATED, Json(summary)))
}

pub async fn select(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: FeatureRequest = parse_required(&body)?;
    let mut s = state.session.write().await;
    let sel = select_features(s.dataset()?, &req)?;
    let out = serde_json::to_value(&sel).expect("selection serializes");
    s.features = Some(sel);
    Ok(Json(out))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverRequest {
    pub config: Option<DiscoveryConfig>,
}

pub async fn start_discovery(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: DiscoverRequest = parse_body(&body, true)?;
    let mut s = state.session.write().await;
    if let Some(id) = s.running_job() {
        return Err(ApiError::conflict("job_running", format!("discovery job {id} is still running")));
    }
    let cfg = req.config.unwrap_or_else(|| s.config.clone());
    cfg.validate()?;
    let data = match &s.features {
        Some(f) => Arc::new(s.dataset()?.select(&f.selected)?),
        None => s.dataset()?.clone(),
    };
    s.next_job += 1;
    let id = s.next_job;
    s.jobs.insert(id, Job { id, kind: "discover", status: JobStatus::Running, version: None, error: None, edges: None });
    s.config = cfg.clone();
    drop(s);

    let shared = state.clone();
    tokio::spawn(async move {
        let result = tokio::task::spawn_blocking(move || discover(&data, &cfg)).await;
        let mut s = shared.session.write().await;
        let outcome = match result {
            Ok(Ok((g, summary))) => {
                let edges = g.edges().len();
                s.set_graph(g);
                s.bootstrap = Some(summary);
                Ok((s.version, edges))
            }
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(format!("discovery task failed: {e}")),
        };
        let job = s.jobs.get_mut(&id).expect("job registered before spawn");
        match outcome {
            Ok((v, edges)) => {
                job.status = JobStatus::Succeeded;
                job.version = Some(v);
                job.edges = Some(edges);
            }
            Err(msg) => {
                tracing::warn!("discovery job {id} failed: {msg}");
                job.status = JobStatus::Failed;
                job.error = Some(msg);
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"job_id": id, "status": "running"}))))
}

pub async fn job(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Json<Job>> {
    let s = state.session.read().await;
    s.jobs.get(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("no job with id {id}")))
}

#[derive(Serialize)]
struct GraphView<'a> {
    version: u64,
    graph: &'a CausalGraph,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotated: Option<causeway_core::knowledge::AnnotatedGraph>,
}

pub async fn get_graph(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let s = state.session.read().await;
    let g = s.graph()?;
    let view = GraphView { version: s.version, graph: g, annotated: s.ontology.as_ref().map(|o| annotate_graph(g, o)) };
    Ok(Json(serde_json::to_value(&view).expect("graph serializes")))
}

pub async fn put_graph(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::schema("graph body is not UTF-8"))?;
    let g = CausalGraph::from_json(text)?;
    let mut s = state.session.write().await;
    s.set_graph(g);
    Ok(Json(json!({"version": s.version})))
}

// flatten and deny_unknown_fields do not combine in serde; unknown keys are ignored here
#[derive(Debug, Deserialize)]
pub struct EditRequest {
    #[serde(flatten)]
    pub op: EditOp,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub timestamp: Option<f64>,
}

pub async fn edit_graph(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: EditRequest = parse_required(&body)?;
    let edit = GraphEdit {
        op: req.op,
        author: req.author.unwrap_or_else(|| "operator".into()),
        timestamp: req.timestamp.unwrap_or_else(now_secs),
    };
    let mut s = state.session.write().await;
    let s = &mut *s;
    let history = s.history.as_mut().ok_or_else(|| ApiError::precondition("no causal graph to edit"))?;
    history.apply(edit, s.ontology.as_ref())?;
    s.version += 1;
    s.last_rca = None;
    let g = s.history.as_ref().expect("history present").graph();
    Ok(Json(json!({"version": s.version, "edits": s.history.as_ref().map(|h| h.version()), "graph": g})))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct EffectsQuery {
    pub hops: bool,
}

pub async fn effects(State(state): State<AppState>, Query(q): Query<EffectsQuery>) -> ApiResult<Json<Value>> {
    let em = state.session.write().await.effects()?;
    Ok(Json(json!({"effects": em.to_document(q.hops)})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub source: String,
    #[serde(default)]
    pub a1: Option<f64>,
    #[serde(default)]
    pub a2: Option<f64>,
}

pub async fn whatif(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: WhatIfRequest = parse_required(&body)?;
    let mut s = state.session.write().await;
    let em = s.effects()?;
    let (a1, a2) = match (req.a1, req.a2) {
        (Some(a1), Some(a2)) => (a1, a2),
        (a1, a2) => {
            let d = s.dataset.as_ref().ok_or_else(|| {
                ApiError::precondition("a1 and a2 are required when no dataset is loaded")
            })?;
            let (q1, q3) = default_levels(d, &req.source)?;
            (a1.unwrap_or(q1), a2.unwrap_or(q3))
        }
    };
    let effects = predict_intervention(&em, &req.source, a1, a2)?;
    Ok(Json(json!({"source": req.source, "a1": a1, "a2": a2, "effects": effects})))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualRequest {
    pub pairs: Option<Vec<CounterfactualSpec>>,
    pub options: Option<CounterfactualOptions>,
}

pub async fn counterfactuals(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: CounterfactualRequest = parse_body(&body, true)?;
    let (d, em) = {
        let mut s = state.session.write().await;
        (s.dataset()?.clone(), s.effects()?)
    };
    let opts = req.options.unwrap_or_default();
    let results = tokio::task::spawn_blocking(move || counterfactual_validate(&d, &em, req.pairs.as_deref(), &opts))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(json!({"results": results})))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcaRequest {
    /// Observed values by variable name; alternative to `row`.
    pub values: Option<BTreeMap<String, f64>>,
    /// Row of the loaded dataset to analyse.
    pub row: Option<usize>,
    pub cycle_state: Option<String>,
    pub target: Option<String>,
    pub k: Option<usize>,
}

pub async fn rca(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: RcaRequest = parse_required(&body)?;
    let mut s = state.session.write().await;
    let em = s.effects()?;
    let nodes = em.nodes.clone();
    let (values, row_state) = match (&req.values, req.row) {
        (Some(_), Some(_)) => return Err(ApiError::schema("give either `values` or `row`, not both")),
        (None, None) => return Err(ApiError::schema("one of `values` or `row` is required")),
        (Some(map), None) => {
            let v = nodes
                .iter()
                .map(|n| map.get(n).copied().ok_or_else(|| ApiError::schema(format!("missing value for `{n}`"))))
                .collect::<ApiResult<Vec<_>>>()?;
            (v, None)
        }
        (None, Some(r)) => {
            let d = s.dataset()?;
            if r >= d.rows() {
                return Err(ApiError::not_found(format!("row {r} is out of range ({} rows)", d.rows())));
            }
            let v = nodes.iter().map(|n| d.column(n).map(|c| c[r])).collect::<Result<Vec<_>, _>>()?;
            (v, d.cycle_state().map(|c| c[r].clone()))
        }
    };
    let cycle_state = req.cycle_state.or(row_state);
    let dev = detect_deviations(&nodes, &values, s.tolerances()?, cycle_state.as_deref())?;
    let target = match req.target {
        Some(t) => t,
        None => most_deviant_variable(&dev)
            .ok_or_else(|| ApiError::precondition("no variable is outside its tolerance band; pass `target`"))?,
    };
    let report = rank_root_causes(&dev, &em, &target, req.k)?;
    let out = json!({"version": s.version, "deviations": dev, "report": report});
    let top: Vec<String> = report.ranked_variables().into_iter().take(3).collect();
    s.last_rca = Some(report);
    drop(s);
    remember(&state, json!({"event": "rca", "target": target, "cycle_state": cycle_state, "top": top})).await;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaRequest {
    pub question: String,
}

pub async fn qa(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: QaRequest = parse_required(&body)?;
    let answer = {
        let mut s = state.session.write().await;
        let em = s.effects().ok();
        let levels: Option<BTreeMap<String, f64>> = s.dataset.as_ref().map(|d| {
            d.variables().iter().zip(d.columns()).map(|(n, c)| (n.clone(), quantile(c, 0.5))).collect()
        });
        let qs = QaState {
            graph: s.history.as_ref().map(|h| h.graph()),
            effects: em.as_deref(),
            rca: s.last_rca.as_ref(),
            config: s.bootstrap.as_ref().map(|b| &b.config),
            ontology: s.ontology.as_ref(),
            reference_levels: levels.as_ref(),
        };
        ask(&req.question, &qs)
    };
    remember(
        &state,
        json!({"event": "qa", "question": req.question, "template_id": answer.template_id, "status": answer.status}),
    )
    .await;
    Ok(Json(serde_json::to_value(&answer).expect("answer serializes")))
}

pub async fn recall(State(state): State<AppState>, Query(filter): Query<RecallFilter>) -> ApiResult<Json<Value>> {
    let mem = state.memory.lock().await;
    let store = mem.as_ref().ok_or_else(|| ApiError::precondition("memory is disabled; start with a state directory"))?;
    Ok(Json(json!({"records": store.recall(&filter)})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryWrite {
    pub kind: MemoryKind,
    pub payload: Value,
}

pub async fn record(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: MemoryWrite = parse_required(&body)?;
    let mut mem = state.memory.lock().await;
    let store = mem.as_mut().ok_or_else(|| ApiError::precondition("memory is disabled; start with a state directory"))?;
    let rec = store.record_event(req.kind, req.payload).map_err(|e| match e {
        causeway_core::Error::Schema(m) => ApiError::schema(m),
        other => other.into(),
    })?;
    Ok((StatusCode::CREATED, Json(rec)))
}

pub async fn put_ontology(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::schema("ontology body is not UTF-8"))?;
    let ont = load_ontology(text)?;
    let mut s = state.session.write().await;
    if !ont.tolerances().is_empty() {
        s.tolerances = Some(ont.tolerances().clone());
    }
    let n = ont.entities().count();
    s.ontology = Some(ont);
    Ok(Json(json!({"entities": n})))
}

pub async fn put_tolerances(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::schema("tolerance body is not UTF-8"))?;
    let spec = ToleranceSpec::from_json(text)?;
    let n = spec.variables().count();
    state.session.write().await.tolerances = Some(spec);
    Ok(Json(json!({"variables": n})))
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRequest {
    pub k_sigma: f64,
    pub per_state: bool,
}

impl Default for FitRequest {
    fn default() -> Self {
        Self { k_sigma: 3.0, per_state: true }
    }
}

pub async fn fit(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: FitRequest = parse_body(&body, true)?;
    let mut s = state.session.write().await;
    let spec = fit_tolerances(s.dataset()?, req.k_sigma, req.per_state)?;
    let out = serde_json::to_value(&spec).expect("tolerances serialize");
    s.tolerances = Some(spec);
    Ok(Json(json!({"tolerances": out})))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayRequest {
    pub rate: Option<f64>,
    #[serde(rename = "loop")]
    pub looping: bool,
}

async fn plan(state: &AppState, req: &ReplayRequest) -> ApiResult<ReplayPlan> {
    let s = state.session.read().await;
    let d = (**s.dataset()?).clone();
    Ok(ReplayPlan::new(d, s.tolerances.clone(), req.rate.unwrap_or(state.options.replay_rate), req.looping)?)
}

pub async fn replay_start(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: ReplayRequest = parse_body(&body, true)?;
    let plan = plan(&state, &req).await?;
    let status = replay::start(&state.0, plan).await?;
    Ok((StatusCode::ACCEPTED, Json(status)))
}

pub async fn replay_stop(State(state): State<AppState>) -> Json<replay::ReplayStatus> {
    Json(replay::stop(&state).await)
}

pub async fn replay_status(State(state): State<AppState>) -> Json<replay::ReplayStatus> {
    Json(state.replay.lock().await.status())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamQuery {
    /// Starts a replay after subscribing, so no early event is missed.
    pub autostart: bool,
    pub rate: Option<f64>,
    #[serde(rename = "loop")]
    pub looping: bool,
}

fn to_sse(ev: &ReplayEvent) -> Event {
    let name = if ev.is_end() { "end" } else { "row" };
    Event::default()
        .id(ev.seq().to_string())
        .event(name)
        .data(serde_json::to_string(ev).expect("event serializes"))
}

pub async fn stream_events(
    State(state): State<AppState>,
    Query(q): Query<StreamQuery>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let rx = state.events.subscribe();
    if q.autostart {
        let req = ReplayRequest { rate: q.rate, looping: q.looping };
        let plan = plan(&state, &req).await?;
        replay::start(&state.0, plan).await?;
    }
    // the stream ends right after forwarding a terminal event
    let s = stream::unfold((rx, false), |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let end = ev.is_end();
                    return Some((Ok(to_sse(&ev)), (rx, end)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!("stream subscriber lagged; {n} events skipped");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(s).keep_alive(KeepAlive::default()))
}
