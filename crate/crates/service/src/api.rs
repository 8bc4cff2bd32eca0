//! HTTP/JSON endpoints.
//!
//! Mutations of one subject are serialized by a per-subject lock; reads take
//! no lock because every store write is an atomic rename. Any non-GET request
//! carrying an `Idempotency-Key` header is executed at most once per key and
//! its successful response is replayed on retry.

use std::collections::{BTreeMap, HashMap};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emobase::features::{extract_features, FeatureMask, Window, DEFAULT_WINDOW, N_FEATURES};
use emobase::learn::{variable_importance, ClassLabel, Model};
use emobase::protocol::{
    check_convergence, generate_session, ingest_ranking, seed_profile, validate_plan, validate_pool,
    ConvergenceConfig, ConvergenceStatus, PlanContext, Questionnaire, Ranking, SessionConstraints, SessionPlan,
    StimulusClip,
};
use emobase::signal::io::{RecordedSession, SessionManifest};
use emobase::signal::pipeline::{ingest_session, IngestConfig};
use emobase::signal::{ChannelId, EmotionLabel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, OwnedMutexGuard};
use tower_http::cors::{Any, CorsLayer};

use crate::error::{Result, ServiceError};
use crate::runs::{self, DatasetMeta, DatasetParams, RunDescriptor, RunStatus};
use crate::store::{check_id, sha256_hex, IdempotentRecord, Store};

/// Request bodies carry whole recordings, so the limit is generous.
const BODY_LIMIT: usize = 512 << 20;
const IDEMPOTENCY_HEADER: &str = "idempotency-key";
const REPLAY_HEADER: &str = "idempotent-replayed";

pub struct AppState {
    pub store: Store,
    locks: std::sync::Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

pub type App = Arc<AppState>;

impl AppState {
    /// Opens the store and fails runs a previous process left pending.
    pub fn new(store: Store) -> Result<App> {
        runs::fail_interrupted(&store)?;
        Ok(Arc::new(Self { store, locks: Default::default() }))
    }

    async fn lock(&self, scope: &str) -> OwnedMutexGuard<()> {
        let m = {
            let mut map = self.locks.lock().expect("lock map poisoned");
            map.entry(scope.to_string()).or_default().clone()
        };
        m.lock_owned().await
    }
}

/// Parses a JSON body: syntax errors are 400, shape or value errors 422.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ServiceError::Validation(format!("invalid request body: {e}")),
        _ => ServiceError::BadRequest(format!("malformed JSON body: {e}")),
    })
}

/// Like [`parse`], but an empty body yields the default.
fn parse_or_default<T: DeserializeOwned + Default>(body: &[u8]) -> Result<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

pub fn router(app: App) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/pool", get(get_pool).put(put_pool))
        .route("/subjects", post(create_subject))
        .route("/subjects/{id}", get(get_subject))
        .route("/subjects/{id}/sessions/next", get(next_session))
        .route("/subjects/{id}/sessions/{sid}/rankings", post(post_rankings))
        .route("/subjects/{id}/recordings", post(post_recording))
        .route("/subjects/{id}/datasets", post(post_dataset))
        .route("/subjects/{id}/datasets/{dataset_id}", get(get_dataset))
        .route("/subjects/{id}/train", post(post_train))
        .route("/subjects/{id}/convergence", get(get_convergence))
        .route("/runs/{run_id}", get(get_run))
        .route("/models/{model_id}/importance", get(get_importance))
        .route("/models/{model_id}/predict", post(post_predict))
        .layer(middleware::from_fn_with_state(app.clone(), idempotency))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(app)
}

async fn idempotency(State(app): State<App>, req: Request, next: Next) -> Response {
    let key = match req.headers().get(IDEMPOTENCY_HEADER) {
        Some(k) if req.method() != Method::GET => k.to_str().map(str::to_string),
        _ => return next.run(req).await,
    };
    let Ok(key) = key else {
        return ServiceError::BadRequest("idempotency key must be visible ASCII".into()).into_response();
    };
    let (parts, body) = req.into_parts();
    let bytes = match to_bytes(body, BODY_LIMIT).await {
        Ok(b) => b,
        Err(e) => return ServiceError::BadRequest(format!("unreadable body: {e}")).into_response(),
    };
    let key_hash = sha256_hex(format!("{} {}\n{key}", parts.method, parts.uri.path()).as_bytes());
    let request_sha256 = sha256_hex(&bytes);
    let _guard = app.lock(&format!("idempotency:{key_hash}")).await;

    match app.store.idempotent(&key_hash) {
        Ok(Some(rec)) if rec.request_sha256 != request_sha256 => {
            return ServiceError::Validation("idempotency key was already used with a different body".into())
                .into_response()
        }
        Ok(Some(rec)) => {
            let status = StatusCode::from_u16(rec.status).unwrap_or(StatusCode::OK);
            let mut resp = (status, rec.body).into_response();
            resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
            resp.headers_mut().insert(REPLAY_HEADER, HeaderValue::from_static("true"));
            return resp;
        }
        Ok(None) => {}
        Err(e) => return e.into_response(),
    }

    let resp = next.run(Request::from_parts(parts, Body::from(bytes))).await;
    if !resp.status().is_success() {
        return resp;
    }
    let (parts, body) = resp.into_parts();
    let body = match to_bytes(body, BODY_LIMIT).await {
        Ok(b) => b,
        Err(e) => return ServiceError::Internal(format!("response body: {e}")).into_response(),
    };
    let rec = IdempotentRecord {
        request_sha256,
        status: parts.status.as_u16(),
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    if let Err(e) = app.store.put_idempotent(&key_hash, &rec) {
        return e.into_response();
    }
    Response::from_parts(parts, Body::from(body))
}

// pool

async fn get_pool(State(app): State<App>) -> Result<Json<Vec<StimulusClip>>> {
    Ok(Json(app.store.pool()?))
}

async fn put_pool(State(app): State<App>, body: Bytes) -> Result<Json<serde_json::Value>> {
    let pool: Vec<StimulusClip> = parse(&body)?;
    validate_pool(&pool)?;
    let _g = app.lock("global").await;
    app.store.put_pool(&pool)?;
    Ok(Json(serde_json::json!({ "clips": pool.len() })))
}

// subjects

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSubject {
    #[serde(default)]
    subject_id: Option<String>,
    #[serde(default)]
    questionnaire: Option<Questionnaire>,
}

#[derive(Debug, Serialize)]
struct Created {
    subject_id: String,
}

async fn create_subject(State(app): State<App>, body: Bytes) -> Result<(StatusCode, Json<Created>)> {
    let req: CreateSubject = parse_or_default(&body)?;
    let _g = app.lock("global").await;
    let id = match req.subject_id {
        Some(id) => {
            check_id("subject", &id)?;
            if app.store.has_subject(&id) {
                return Err(ServiceError::Conflict(format!("subject `{id}` already exists")));
            }
            id
        }
        None => {
            let taken = app.store.subject_ids()?;
            (taken.len() + 1..)
                .map(|n| format!("subj-{n:04}"))
                .find(|c| !taken.contains(c))
                .expect("unbounded range")
        }
    };
    let pool = app.store.pool()?;
    let profile = seed_profile(&id, req.questionnaire.unwrap_or_else(Questionnaire::neutral), &pool)?;
    app.store.put_profile(&profile)?;
    Ok((StatusCode::CREATED, Json(Created { subject_id: id })))
}

#[derive(Debug, Serialize)]
struct SubjectView {
    profile: emobase::protocol::SubjectProfile,
    recordings: Vec<String>,
    completed_sessions: usize,
}

async fn get_subject(State(app): State<App>, Path(id): Path<String>) -> Result<Json<SubjectView>> {
    let profile = app.store.profile(&id)?;
    let recordings = app.store.recordings(&id)?.into_iter().map(|r| r.manifest.session_id).collect();
    let completed_sessions = profile.completed_sessions();
    Ok(Json(SubjectView { profile, recordings, completed_sessions }))
}

// sessions and rankings

#[derive(Debug, Default, Deserialize)]
struct NextQuery {
    #[serde(default)]
    personalized: bool,
}

/// The subject's open plan if its session has no rankings yet, otherwise a
/// freshly generated and validated plan.
async fn next_session(
    State(app): State<App>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Json<SessionPlan>> {
    check_id("subject", &id)?;
    let _g = app.lock(&id).await;
    let mut profile = app.store.profile(&id)?;
    if let Some(last) = profile.sessions.last() {
        if !profile.rankings.iter().any(|r| r.session_id == last.session_id) {
            return Ok(Json(last.clone()));
        }
    }
    let cap = ConvergenceConfig::default().max_sessions;
    if profile.completed_sessions() >= cap {
        return Err(ServiceError::Conflict(format!("subject `{id}` has reached the {cap}-session limit")));
    }
    let pool = app.store.pool()?;
    if pool.is_empty() {
        return Err(ServiceError::Conflict("the stimulus pool is empty; PUT /pool first".into()));
    }
    let cons = if q.personalized { SessionConstraints::personalized() } else { SessionConstraints::default() };
    let plan = generate_session(&profile, &pool, &cons)?;
    validate_plan(&plan, &PlanContext::for_profile(&profile, &pool, &cons))
        .map_err(|e| ServiceError::Internal(format!("generated plan failed validation: {e}")))?;
    profile.sessions.push(plan.clone());
    app.store.put_profile(&profile)?;
    Ok(Json(plan))
}

/// Wire form of a ranking; the session comes from the path and the score is
/// range-checked before narrowing.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RankingInput {
    clip_id: String,
    score: i64,
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    evoked_emotion: Option<EmotionLabel>,
    #[serde(default)]
    effective_span: Option<(f64, f64)>,
    #[serde(default)]
    notes: String,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

#[derive(Debug, Serialize)]
struct RankingsAccepted {
    session_id: String,
    accepted: usize,
    completed_sessions: usize,
}

/// All rankings in the body are applied or none are.
async fn post_rankings(
    State(app): State<App>,
    Path((id, sid)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<RankingsAccepted>> {
    check_id("subject", &id)?;
    let value: serde_json::Value = parse(&body)?;
    let inputs = match serde_json::from_value::<OneOrMany<RankingInput>>(value) {
        Ok(OneOrMany::Many(v)) => v,
        Ok(OneOrMany::One(r)) => vec![r],
        Err(e) => return Err(ServiceError::Validation(format!("invalid ranking: {e}"))),
    };
    if inputs.is_empty() {
        return Err(ServiceError::Validation("no rankings submitted".into()));
    }
    let _g = app.lock(&id).await;
    let mut profile = app.store.profile(&id)?;
    if !profile.sessions.iter().any(|s| s.session_id == sid) {
        return Err(ServiceError::NotFound(format!("session `{sid}` not found for subject `{id}`")));
    }
    let pool = app.store.pool()?;
    for r in &inputs {
        if r.session_id.as_ref().is_some_and(|s| *s != sid) {
            return Err(ServiceError::Validation(format!("ranking for `{}` names a different session", r.clip_id)));
        }
        if !(1..=10).contains(&r.score) {
            return Err(ServiceError::Validation(format!("score {} for `{}` outside 1-10", r.score, r.clip_id)));
        }
        let ranking = Ranking {
            clip_id: r.clip_id.clone(),
            session_id: sid.clone(),
            score: r.score as u8,
            evoked_emotion: r.evoked_emotion,
            effective_span: r.effective_span,
            notes: r.notes.clone(),
        };
        profile = ingest_ranking(&profile, &pool, ranking)?;
    }
    app.store.put_profile(&profile)?;
    Ok(Json(RankingsAccepted {
        session_id: sid,
        accepted: inputs.len(),
        completed_sessions: profile.completed_sessions(),
    }))
}

// recordings

#[derive(Debug, Serialize)]
struct RecordingAccepted {
    session_id: String,
    usable_samples: usize,
    degenerate_channels: Vec<ChannelId>,
}

/// Either `multipart/form-data` with a `manifest` part (session manifest
/// JSON) plus one part per device, named after the device and holding its
/// CSV, or the same content as one JSON document.
async fn read_recording_body(req: Request) -> Result<RecordedSession> {
    let multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if !multipart {
        let body = to_bytes(req.into_body(), BODY_LIMIT)
            .await
            .map_err(|e| ServiceError::BadRequest(format!("unreadable body: {e}")))?;
        return parse(&body);
    }
    let bad = |e: MultipartError| ServiceError::BadRequest(format!("malformed multipart body: {}", e.body_text()));
    let mut parts = Multipart::from_request(req, &()).await.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let mut manifest: Option<SessionManifest> = None;
    let mut recordings = BTreeMap::new();
    while let Some(field) = parts.next_field().await.map_err(bad)? {
        let name = field
            .name()
            .ok_or_else(|| ServiceError::BadRequest("multipart part without a name".into()))?
            .to_string();
        let text = field.text().await.map_err(bad)?;
        if name == "manifest" {
            manifest = Some(parse(text.as_bytes())?);
        } else {
            check_id("device", &name)?;
            if recordings.insert(name.clone(), text).is_some() {
                return Err(ServiceError::Validation(format!("device `{name}` uploaded twice")));
            }
        }
    }
    let manifest = manifest.ok_or_else(|| ServiceError::Validation("upload lacks a `manifest` part".into()))?;
    if recordings.is_empty() {
        return Err(ServiceError::Validation("upload has no device recordings".into()));
    }
    Ok(RecordedSession { manifest, recordings })
}

/// Validates a recording by running it through ingestion before storing
/// it. Re-posting identical content is accepted; different content under an
/// existing session id is a conflict.
async fn post_recording(
    State(app): State<App>,
    Path(id): Path<String>,
    req: Request,
) -> Result<(StatusCode, Json<RecordingAccepted>)> {
    check_id("subject", &id)?;
    let rec = read_recording_body(req).await?;
    check_id("session", &rec.manifest.session_id)?;
    let _g = app.lock(&id).await;
    app.store.profile(&id)?;
    let (rec, ingested) = blocking(move || {
        let ingested = ingest_session(&rec.manifest, &rec.streams()?, &IngestConfig::default())?;
        Ok((rec, ingested))
    })
    .await?;
    let status = match app.store.recording(&id, &rec.manifest.session_id)? {
        Some(old) if old == rec => StatusCode::OK,
        Some(_) => {
            return Err(ServiceError::Conflict(format!(
                "a different recording for session `{}` is already stored",
                rec.manifest.session_id
            )))
        }
        None => {
            app.store.put_recording(&id, &rec)?;
            StatusCode::CREATED
        }
    };
    Ok((
        status,
        Json(RecordingAccepted {
            session_id: rec.manifest.session_id,
            usable_samples: ingested.signals.usable_count(),
            degenerate_channels: ingested.degenerate_channels,
        }),
    ))
}

// datasets and training

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRequest {
    #[serde(default)]
    w: Option<usize>,
    #[serde(default)]
    min_rank: Option<u8>,
    /// Feature names; defaults to every feature except SKT_mean.
    #[serde(default)]
    mask: Option<Vec<String>>,
    #[serde(default)]
    with_skt: bool,
}

async fn post_dataset(
    State(app): State<App>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<DatasetMeta>)> {
    check_id("subject", &id)?;
    let req: DatasetRequest = parse_or_default(&body)?;
    let mask = match (&req.mask, req.with_skt) {
        (Some(_), true) => return Err(ServiceError::Validation("give either `mask` or `with_skt`".into())),
        (Some(names), false) => runs::parse_mask(names)?,
        (None, true) => FeatureMask::all(),
        (None, false) => FeatureMask::without_skt(),
    };
    if let Some(r) = req.min_rank.filter(|r| !(1..=10).contains(r)) {
        return Err(ServiceError::Validation(format!("min_rank {r} outside 1-10")));
    }
    let params = DatasetParams { w: req.w.unwrap_or(DEFAULT_WINDOW), min_rank: req.min_rank, mask };
    let _g = app.lock(&id).await;
    let store = app.store.clone();
    let meta = blocking(move || runs::build_dataset(&store, &id, params)).await?;
    Ok((StatusCode::CREATED, Json(meta)))
}

async fn get_dataset(
    State(app): State<App>,
    Path((id, dataset_id)): Path<(String, String)>,
) -> Result<Json<DatasetMeta>> {
    check_id("subject", &id)?;
    Ok(Json(app.store.dataset_meta(&id, &dataset_id)?))
}

fn default_classifier() -> String {
    "rf".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    dataset_id: String,
    #[serde(default = "default_classifier")]
    classifier: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    binary: bool,
    #[serde(default, rename = "async")]
    run_async: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunView {
    pub run: RunDescriptor,
    pub report: Option<emobase::eval::EvalReport>,
}

fn run_view(store: &Store, run: RunDescriptor) -> Result<RunView> {
    let report = runs::load_report(store, &run)?;
    Ok(RunView { run, report })
}

/// Synchronous by default (200 with the finished run). With `async` the run
/// is started off the request path and 202 is returned for polling.
async fn post_train(State(app): State<App>, Path(id): Path<String>, body: Bytes) -> Result<(StatusCode, Json<RunView>)> {
    check_id("subject", &id)?;
    let req: TrainRequest = parse(&body)?;
    let meta = app.store.dataset_meta(&id, &req.dataset_id)?;
    let run = RunDescriptor::new(&meta, &req.classifier, req.seed, req.binary)?;
    let guard = app.lock(&format!("run:{}", run.run_id)).await;
    match app.store.run(&run.run_id)? {
        Some(existing) if existing.status == RunStatus::Done => {
            return Ok((StatusCode::OK, Json(run_view(&app.store, existing)?)))
        }
        Some(existing) if existing.status == RunStatus::Pending => {
            return Ok((StatusCode::ACCEPTED, Json(RunView { run: existing, report: None })))
        }
        _ => {}
    }
    if req.run_async {
        app.store.put_run(&run)?;
        let store = app.store.clone();
        let pending = run.clone();
        tokio::spawn(async move {
            let _guard = guard;
            let store2 = store.clone();
            let r = pending.clone();
            if let Err(e) = blocking(move || runs::execute_recorded(&store2, &r)).await {
                let failed = RunDescriptor { status: RunStatus::Failed, error: Some(e.to_string()), ..pending };
                let _ = store.put_run(&failed);
            }
        });
        return Ok((StatusCode::ACCEPTED, Json(RunView { run, report: None })));
    }
    let store = app.store.clone();
    let done = blocking(move || runs::execute_recorded(&store, &run)).await?;
    drop(guard);
    if done.status == RunStatus::Failed {
        return Err(ServiceError::Validation(done.error.unwrap_or_else(|| "training failed".into())));
    }
    Ok((StatusCode::OK, Json(run_view(&app.store, done)?)))
}

async fn get_run(State(app): State<App>, Path(run_id): Path<String>) -> Result<Json<RunView>> {
    let run = app.store.run(&run_id)?.ok_or_else(|| ServiceError::NotFound(format!("run `{run_id}` not found")))?;
    Ok(Json(run_view(&app.store, run)?))
}

// models

#[derive(Debug, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub mean_decrease_gini: f64,
}

async fn get_importance(State(app): State<App>, Path(model_id): Path<String>) -> Result<Json<Vec<ImportanceRow>>> {
    let model = runs::load_model(&app.store, &model_id)?;
    let Model::Forest(forest) = &model.model else {
        return Err(ServiceError::Validation(format!(
            "variable importance needs a random forest, model {model_id} is {}",
            model.trainer.short_name()
        )));
    };
    Ok(Json(
        variable_importance(forest)
            .into_iter()
            .map(|(f, v)| ImportanceRow { feature: f.column_name().to_string(), mean_decrease_gini: v })
            .collect(),
    ))
}

/// Either a feature vector (all 17 features, or exactly the model's columns
/// in order) or a raw window of normalized samples per channel.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    #[serde(default)]
    features: Option<Vec<f64>>,
    #[serde(default)]
    window: Option<BTreeMap<ChannelId, Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ClassLabel,
    pub label: String,
    pub code: u8,
}

async fn post_predict(
    State(app): State<App>,
    Path(model_id): Path<String>,
    body: Bytes,
) -> Result<Json<Prediction>> {
    let req: PredictRequest = parse(&body)?;
    let model = runs::load_model(&app.store, &model_id)?;
    let full: Option<[f64; N_FEATURES]> = match (req.features, req.window) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(ServiceError::Validation("give exactly one of `features` or `window`".into()))
        }
        (Some(v), None) if v.len() == model.columns.len() => {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ServiceError::Validation("features must be finite".into()));
            }
            let class = model.predict(&v)?;
            return Ok(Json(Prediction { class, label: class.to_string(), code: class.code() }));
        }
        (Some(v), None) => Some(v.try_into().map_err(|v: Vec<f64>| {
            ServiceError::Validation(format!(
                "expected {N_FEATURES} features or the model's {} columns, got {}",
                model.columns.len(),
                v.len()
            ))
        })?),
        (None, Some(channels)) => {
            let window = Window {
                session_id: "predict".into(),
                label: EmotionLabel::Rest,
                clip_id: None,
                start_s: 0.0,
                channels,
            };
            Some(extract_features(&window)?)
        }
    };
    let full = full.expect("every other arm returns");
    if full.iter().any(|x| !x.is_finite()) {
        return Err(ServiceError::Validation("features must be finite".into()));
    }
    let x: Vec<f64> = model.columns.iter().map(|f| full[f.index()]).collect();
    let class = model.predict(&x)?;
    Ok(Json(Prediction { class, label: class.to_string(), code: class.code() }))
}

// convergence

#[derive(Debug, Default, Deserialize)]
struct ConvergenceQuery {
    #[serde(default)]
    min_rank: Option<u8>,
    #[serde(default)]
    target_min: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConvergenceView {
    pub status: ConvergenceStatus,
    pub minutes: BTreeMap<EmotionLabel, f64>,
    pub target_min: f64,
    pub min_rank: u8,
    pub completed_sessions: usize,
    pub max_sessions: usize,
}

async fn get_convergence(
    State(app): State<App>,
    Path(id): Path<String>,
    Query(q): Query<ConvergenceQuery>,
) -> Result<Json<ConvergenceView>> {
    let d = ConvergenceConfig::default();
    let cfg = ConvergenceConfig {
        target_min: q.target_min.unwrap_or(d.target_min),
        min_rank: q.min_rank.unwrap_or(d.min_rank),
        ..d
    };
    let profile = app.store.profile(&id)?;
    let pool = app.store.pool()?;
    Ok(Json(ConvergenceView {
        status: check_convergence(&profile, &pool, &cfg),
        minutes: emobase::protocol::good_minutes(&profile, &pool, cfg.min_rank),
        target_min: cfg.target_min,
        min_rank: cfg.min_rank,
        completed_sessions: profile.completed_sessions(),
        max_sessions: cfg.max_sessions,
    }))
}

// server

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub store: PathBuf,
    pub cors_origin: Option<String>,
}

/// Builds the full application, including the optional CORS layer.
pub fn app(store: Store, cors_origin: Option<&str>) -> Result<Router> {
    let router = router(AppState::new(store)?);
    let Some(origin) = cors_origin else { return Ok(router) };
    let origin = HeaderValue::from_str(origin)
        .map_err(|_| ServiceError::BadRequest(format!("invalid CORS origin `{origin}`")))?;
    Ok(router.layer(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST, Method::PUT])
            .allow_headers(Any),
    ))
}

/// Serves until Ctrl-C. Startup problems (unusable store, busy port) come
/// back as a diagnostic message.
pub async fn serve(cfg: ServeConfig) -> std::result::Result<(), String> {
    let store = Store::open(&cfg.store).map_err(|e| format!("cannot open store {}: {e}", cfg.store.display()))?;
    let app = app(store, cfg.cors_origin.as_deref()).map_err(|e| e.to_string())?;
    let addr = SocketAddr::new(cfg.bind, cfg.port);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("cannot listen on {addr}: {e}"))?;
    eprintln!("emobase: serving on http://{addr} with store {}", cfg.store.display());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| format!("server error: {e}"))
}
