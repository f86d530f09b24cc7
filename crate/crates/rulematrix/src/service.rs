//! HTTP/JSON service: sessions over a dataset and a teacher, background
//! induction jobs, matrix payloads, filters, probing and paged data rows.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rulematrix_core::dataset::split_train_test;
use rulematrix_core::induce::{induce_with_progress, DatasetRef, ExplanationBundle, InduceConfig, MinerConfig, Stage};
use rulematrix_core::matrix::{build_matrix, MatrixOptions, MatrixPayload, RuleThresholds, DEFAULT_BINS};
use rulematrix_core::metrics::{probe, DataFilter, ProbeResult};
use rulematrix_core::rulelist::{Priors, RuleList};
use rulematrix_core::sbrl::McmcConfig;
use rulematrix_core::{DataTable, DatasetSchema, FeatureKind, Oracle};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::io::{self, LoadOptions};
use crate::teacher::TeacherSpec;

pub const API_PREFIX: &str = "/api/v1";
const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 1000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Where session snapshots go; `None` keeps sessions in memory only.
    pub state_dir: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub oracle_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        let data_dir = data_dir.into();
        ServiceConfig {
            state_dir: Some(data_dir.join("sessions")),
            data_dir,
            ui_dir: None,
            oracle_timeout: crate::external::DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Display {
    #[default]
    Train,
    Test,
}

impl Display {
    fn name(self) -> &'static str {
        match self {
            Display::Train => "train",
            Display::Test => "test",
        }
    }
}

/// Persisted form of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub v: u32,
    pub id: String,
    pub dataset: String,
    pub teacher: String,
    pub split_seed: u64,
    pub test_fraction: f64,
    pub bundle: Option<ExplanationBundle>,
    pub rule_filter: RuleThresholds,
    pub data_filter: DataFilter,
    pub display: Display,
}

struct SessionState {
    bundle: Option<Arc<ExplanationBundle>>,
    rule_filter: RuleThresholds,
    data_filter: DataFilter,
    display: Display,
    busy_job: Option<String>,
}

struct Session {
    id: String,
    dataset: String,
    teacher_spec: String,
    split_seed: u64,
    test_fraction: f64,
    train: DataTable,
    test: DataTable,
    teacher: Arc<dyn Oracle>,
    state: Mutex<SessionState>,
}

impl Session {
    fn snapshot(&self) -> SessionSnapshot {
        let st = self.state.lock().expect("session lock");
        SessionSnapshot {
            v: rulematrix_core::PAYLOAD_VERSION,
            id: self.id.clone(),
            dataset: self.dataset.clone(),
            teacher: self.teacher_spec.clone(),
            split_seed: self.split_seed,
            test_fraction: self.test_fraction,
            bundle: st.bundle.as_deref().cloned(),
            rule_filter: st.rule_filter,
            data_filter: st.data_filter.clone(),
            display: st.display,
        }
    }

    fn table(&self, display: Display) -> &DataTable {
        match display {
            Display::Train => &self.train,
            Display::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobStatus {
    pub v: u32,
    pub id: String,
    pub session_id: String,
    pub state: JobState,
    pub stage: Stage,
    pub progress: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
    jobs: RwLock<BTreeMap<String, Arc<Mutex<JobStatus>>>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

impl AppState {
    /// Creates the state and restores any persisted sessions.
    pub fn open(config: ServiceConfig) -> crate::Result<Arc<AppState>> {
        let state = Arc::new(AppState {
            config,
            sessions: RwLock::new(BTreeMap::new()),
            jobs: RwLock::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
            next_job: AtomicU64::new(1),
        });
        if let Some(dir) = &state.config.state_dir {
            if dir.is_dir() {
                let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                    .map_err(|e| Error::io(dir, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect();
                paths.sort();
                for path in paths {
                    let snap: SessionSnapshot = io::read_json(&path)?;
                    state.restore(snap)?;
                }
            }
        }
        Ok(state)
    }

    fn restore(&self, snap: SessionSnapshot) -> crate::Result<()> {
        let session = self.build_session(snap.id.clone(), &snap.dataset, &snap.teacher, snap.split_seed, snap.test_fraction)?;
        {
            let mut st = session.state.lock().expect("session lock");
            st.bundle = snap.bundle.map(Arc::new);
            st.rule_filter = snap.rule_filter;
            st.data_filter = snap.data_filter;
            st.display = snap.display;
        }
        if let Some(n) = snap.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
            self.next_session.fetch_max(n + 1, Ordering::SeqCst);
        }
        self.sessions.write().expect("sessions lock").insert(snap.id, Arc::new(session));
        Ok(())
    }

    fn build_session(&self, id: String, dataset: &str, teacher: &str, split_seed: u64, test_fraction: f64) -> crate::Result<Session> {
        let spec: TeacherSpec = teacher.parse()?;
        let table = io::load_dataset(&self.config.data_dir, dataset, LoadOptions::default())?;
        let (train, test) = split_train_test(&table, test_fraction, split_seed)?;
        let oracle = spec.build(&train, self.config.oracle_timeout)?;
        Ok(Session {
            id,
            dataset: dataset.to_string(),
            teacher_spec: spec.to_string(),
            split_seed,
            test_fraction,
            train,
            test,
            teacher: Arc::from(oracle),
            state: Mutex::new(SessionState {
                bundle: None,
                rule_filter: RuleThresholds::default(),
                data_filter: DataFilter::default(),
                display: Display::Train,
                busy_job: None,
            }),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
    }

    fn persist(&self, session: &Session) {
        let Some(dir) = &self.config.state_dir else { return };
        let result = std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(dir, e))
            .and_then(|_| io::write_json(&dir.join(format!("{}.json", session.id)), &session.snapshot()));
        if let Err(e) = result {
            tracing::error!(session = %session.id, error = %e, "failed to persist session");
        }
    }
}

pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into() }
    }
    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }
    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "conflict", message)
    }
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match &e {
            Error::UnknownDataset(_) => ApiError::not_found(e.to_string()),
            Error::Core(rulematrix_core::Error::Oracle { .. }) => ApiError::new(StatusCode::BAD_GATEWAY, "oracle_failure", e.to_string()),
            Error::Core(rulematrix_core::Error::Divergence { .. }) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
            Error::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<rulematrix_core::Error> for ApiError {
    fn from(e: rulematrix_core::Error) -> Self {
        ApiError::from(Error::Core(e))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"v": rulematrix_core::PAYLOAD_VERSION, "error": {"kind": self.kind, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/datasets", get(datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/induce", post(start_induce))
        .route("/sessions/{id}/bundle", get(get_bundle))
        .route("/sessions/{id}/matrix", get(get_matrix))
        .route("/sessions/{id}/filters", post(set_filters))
        .route("/sessions/{id}/probe", post(post_probe))
        .route("/sessions/{id}/data", get(get_data))
        .route("/jobs/{job}", get(get_job));
    let mut app = Router::new().route("/health", get(health)).nest(API_PREFIX, api);
    if let Some(ui) = &state.config.ui_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(ui));
    }
    app.with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> crate::Result<()> {
    if !config.data_dir.is_dir() {
        return Err(Error::BadConfig(format!("data directory {} does not exist", config.data_dir.display())));
    }
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => Error::PortInUse(addr.to_string()),
        _ => Error::io(addr.to_string(), e),
    })?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}

async fn health() -> Json<Value> {
    Json(json!({"v": rulematrix_core::PAYLOAD_VERSION, "status": "ok", "version": env!("CARGO_PKG_VERSION")}))
}

async fn datasets(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let names = io::list_datasets(&state.config.data_dir)?;
    Ok(Json(json!({"v": rulematrix_core::PAYLOAD_VERSION, "datasets": names})))
}

#[derive(Deserialize)]
struct CreateSession {
    dataset: String,
    teacher: String,
    #[serde(default)]
    split_seed: u64,
    #[serde(default = "default_test_fraction")]
    test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.25
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<Response> {
    let app = state.clone();
    let mut session = blocking(move || Ok(app.build_session(String::new(), &req.dataset, &req.teacher, req.split_seed, req.test_fraction)?)).await?;
    session.id = format!("s{:04}", state.next_session.fetch_add(1, Ordering::SeqCst));
    let session = Arc::new(session);
    state.sessions.write().expect("sessions lock").insert(session.id.clone(), session.clone());
    state.persist(&session);
    let body = json!({"v": rulematrix_core::PAYLOAD_VERSION, "session_id": session.id});
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Serialize)]
struct SessionSummary<'a> {
    v: u32,
    id: &'a str,
    dataset: &'a str,
    teacher: &'a str,
    split_seed: u64,
    test_fraction: f64,
    train_size: usize,
    test_size: usize,
    schema: &'a DatasetSchema,
    has_bundle: bool,
    busy_job: Option<String>,
    rule_filter: RuleThresholds,
    data_filter: DataFilter,
    display: Display,
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = state.session(&id)?;
    let st = s.state.lock().expect("session lock");
    let summary = SessionSummary {
        v: rulematrix_core::PAYLOAD_VERSION,
        id: &s.id,
        dataset: &s.dataset,
        teacher: &s.teacher_spec,
        split_seed: s.split_seed,
        test_fraction: s.test_fraction,
        train_size: s.train.len(),
        test_size: s.test.len(),
        schema: &s.train.schema,
        has_bundle: st.bundle.is_some(),
        busy_job: st.busy_job.clone(),
        rule_filter: st.rule_filter,
        data_filter: st.data_filter.clone(),
        display: st.display,
    };
    Ok(Json(serde_json::to_value(summary).map_err(Error::from)?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct LearnerConfig {
    priors: Option<Priors>,
    mcmc: Option<McmcConfig>,
    miner: Option<MinerConfig>,
}

#[derive(Deserialize)]
struct InduceRequest {
    sampling_rate: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    learner: LearnerConfig,
}

async fn start_induce(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<InduceRequest>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    if !(req.sampling_rate > 0.0 && req.sampling_rate.is_finite()) {
        return Err(ApiError::bad_request("sampling_rate must be > 0"));
    }
    let config = InduceConfig {
        sampling_rate: req.sampling_rate,
        seed: req.seed,
        priors: req.learner.priors.unwrap_or_default(),
        mcmc: req.learner.mcmc.unwrap_or_default(),
        miner: req.learner.miner.unwrap_or_default(),
        ..InduceConfig::default()
    };
    let job_id = {
        let mut st = session.state.lock().expect("session lock");
        if let Some(job) = &st.busy_job {
            return Err(ApiError::conflict(format!("session is busy with job `{job}`")));
        }
        let job_id = format!("j{:04}", state.next_job.fetch_add(1, Ordering::SeqCst));
        st.busy_job = Some(job_id.clone());
        job_id
    };
    let status = Arc::new(Mutex::new(JobStatus {
        v: rulematrix_core::PAYLOAD_VERSION,
        id: job_id.clone(),
        session_id: id.clone(),
        state: JobState::Running,
        stage: Stage::Estimating,
        progress: 0.0,
        error: None,
    }));
    state.jobs.write().expect("jobs lock").insert(job_id.clone(), status.clone());

    let app = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut last = -1.0;
        let result = induce_with_progress(&session.train, Some(&session.test), &*session.teacher, &config, &mut |stage, p| {
            if p - last >= 0.005 || stage == Stage::Done {
                last = p;
                let mut s = status.lock().expect("job lock");
                s.stage = stage;
                s.progress = p;
            }
        });
        let mut st = session.state.lock().expect("session lock");
        st.busy_job = None;
        let mut job = status.lock().expect("job lock");
        match result {
            Ok(mut bundle) => {
                bundle.dataset = Some(DatasetRef {
                    name: session.dataset.clone(),
                    test_fraction: session.test_fraction,
                    split_seed: session.split_seed,
                });
                bundle.teacher.description = session.teacher_spec.clone();
                st.bundle = Some(Arc::new(bundle));
                job.state = JobState::Done;
                job.stage = Stage::Done;
                job.progress = 1.0;
            }
            Err(e) => {
                tracing::error!(job = %job.id, error = %e, "induction failed");
                job.state = JobState::Failed;
                job.error = Some(e.to_string());
            }
        }
        drop(job);
        drop(st);
        app.persist(&session);
    });
    let body = json!({"v": rulematrix_core::PAYLOAD_VERSION, "job_id": job_id});
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn get_job(State(state): State<Arc<AppState>>, Path(job): Path<String>) -> ApiResult<Json<JobStatus>> {
    let jobs = state.jobs.read().expect("jobs lock");
    let status = jobs.get(&job).ok_or_else(|| ApiError::not_found(format!("unknown job `{job}`")))?;
    let status = status.lock().expect("job lock").clone();
    Ok(Json(status))
}

fn current_bundle(session: &Session) -> ApiResult<Arc<ExplanationBundle>> {
    session
        .state
        .lock()
        .expect("session lock")
        .bundle
        .clone()
        .ok_or_else(|| ApiError::conflict("session has no explanation yet; run induce first"))
}

async fn get_bundle(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ExplanationBundle>> {
    let session = state.session(&id)?;
    Ok(Json((*current_bundle(&session)?).clone()))
}

#[derive(Debug, Default, Deserialize)]
struct MatrixQuery {
    dataset: Option<Display>,
    conditional: Option<bool>,
    stripes: Option<bool>,
    bins: Option<usize>,
}

fn matrix_for(session: &Session, query: &MatrixQuery) -> ApiResult<MatrixPayload> {
    let bundle = current_bundle(session)?;
    let (thresholds, filter, display) = {
        let st = session.state.lock().expect("session lock");
        (st.rule_filter, st.data_filter.clone(), query.dataset.unwrap_or(st.display))
    };
    let options = MatrixOptions {
        conditional: query.conditional.unwrap_or(false),
        show_error_stripes: query.stripes.unwrap_or(true),
        bins: query.bins.unwrap_or(DEFAULT_BINS),
    };
    let data = session.table(display);
    Ok(build_matrix(&bundle.rule_list, data, &*session.teacher, display.name(), thresholds, &filter, options)?)
}

async fn get_matrix(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<MatrixQuery>,
) -> ApiResult<Json<MatrixPayload>> {
    let session = state.session(&id)?;
    Ok(Json(blocking(move || matrix_for(&session, &query)).await?))
}

#[derive(Deserialize)]
struct FilterRequest {
    #[serde(default)]
    min_support: f64,
    #[serde(default)]
    min_confidence: f64,
    #[serde(default)]
    data_filter: DataFilter,
    #[serde(default)]
    dataset: Option<Display>,
}

async fn set_filters(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<FilterRequest>,
) -> ApiResult<Json<MatrixPayload>> {
    let session = state.session(&id)?;
    current_bundle(&session)?;
    if !(req.min_support >= 0.0 && req.min_confidence >= 0.0) {
        return Err(ApiError::bad_request("thresholds must be non-negative"));
    }
    req.data_filter.validate(&session.train.schema)?;
    {
        let mut st = session.state.lock().expect("session lock");
        st.rule_filter = RuleThresholds { min_support: req.min_support, min_confidence: req.min_confidence };
        st.data_filter = req.data_filter;
        if let Some(d) = req.dataset {
            st.display = d;
        }
    }
    state.persist(&session);
    Ok(Json(blocking(move || matrix_for(&session, &MatrixQuery::default())).await?))
}

#[derive(Deserialize)]
struct ProbeRequest {
    /// Numbers, or category labels for categorical features.
    instance: Vec<Value>,
}

/// A probe result with class labels and the fired rule spelled out.
#[derive(Debug, Serialize)]
pub struct ProbeResponse {
    pub v: u32,
    #[serde(flatten)]
    pub result: ProbeResult,
    pub teacher_label: String,
    pub rule_label: String,
    pub fired_rule_text: String,
}

impl ProbeResponse {
    pub fn new(list: &RuleList, schema: &DatasetSchema, result: ProbeResult) -> Self {
        let labels = &schema.label.categories;
        ProbeResponse {
            v: rulematrix_core::PAYLOAD_VERSION,
            teacher_label: labels[result.teacher_class].clone(),
            rule_label: labels[result.rule_class].clone(),
            fired_rule_text: list.rules[result.fired_rule].describe(schema),
            result,
        }
    }
}

/// Converts JSON cells (numbers or category labels) to a raw instance.
pub fn parse_instance(schema: &DatasetSchema, cells: &[Value]) -> crate::Result<Vec<f64>> {
    if cells.len() != schema.width() {
        return Err(rulematrix_core::Error::SchemaMismatch { expected: schema.width(), found: cells.len() }.into());
    }
    cells
        .iter()
        .zip(&schema.features)
        .map(|(cell, f)| match (cell, f.kind) {
            (Value::Number(n), _) => n.as_f64().ok_or_else(|| Error::NonNumeric { row: 1, column: f.name.clone(), value: n.to_string() }),
            (Value::String(s), FeatureKind::Categorical) => f
                .category_index(s)
                .map(|k| k as f64)
                .ok_or_else(|| Error::UnknownCategory { row: 1, column: f.name.clone(), value: s.clone() }),
            (Value::String(s), FeatureKind::Continuous) => {
                s.trim().parse().map_err(|_| Error::NonNumeric { row: 1, column: f.name.clone(), value: s.clone() })
            }
            (other, _) => Err(Error::NonNumeric { row: 1, column: f.name.clone(), value: other.to_string() }),
        })
        .collect()
}

async fn post_probe(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ProbeRequest>,
) -> ApiResult<Json<ProbeResponse>> {
    let session = state.session(&id)?;
    let bundle = current_bundle(&session)?;
    blocking(move || {
        let schema = &session.train.schema;
        let x = parse_instance(schema, &req.instance)?;
        let result = probe(&bundle.rule_list, &*session.teacher, schema, &x)?;
        Ok(Json(ProbeResponse::new(&bundle.rule_list, schema, result)))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
struct DataQuery {
    dataset: Option<Display>,
    offset: Option<usize>,
    limit: Option<usize>,
    /// JSON-encoded data filter; the session's active filter when absent.
    filter: Option<String>,
}

#[derive(Serialize)]
struct DataRow {
    index: usize,
    values: Vec<Value>,
    label: String,
    teacher: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    fired_rule: Option<usize>,
}

async fn get_data(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<DataQuery>,
) -> ApiResult<Json<Value>> {
    let session = state.session(&id)?;
    let (bundle, active, display) = {
        let st = session.state.lock().expect("session lock");
        (st.bundle.clone(), st.data_filter.clone(), query.dataset.unwrap_or(st.display))
    };
    let filter = match &query.filter {
        Some(text) => serde_json::from_str::<DataFilter>(text).map_err(|e| ApiError::bad_request(format!("bad filter: {e}")))?,
        None => active,
    };
    let offset = query.offset.unwrap_or(0);
    let limit = query.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    blocking(move || {
        let table = session.table(display);
        let schema = &table.schema;
        filter.validate(schema)?;
        let indices = filter.select(table.instances());
        let page: Vec<usize> = indices.iter().copied().skip(offset).take(limit).collect();
        let rows = table.instances().select(&page);
        let teacher = rulematrix_core::oracle::predict_batch(&*session.teacher, &rows)?;
        let items: Vec<DataRow> = page
            .iter()
            .zip(rows.rows())
            .zip(teacher)
            .map(|((&i, x), t)| DataRow {
                index: i,
                values: x
                    .iter()
                    .zip(&schema.features)
                    .map(|(&v, f)| match f.kind {
                        FeatureKind::Categorical => Value::from(f.categories[v as usize].clone()),
                        FeatureKind::Continuous => json!(v),
                    })
                    .collect(),
                label: schema.label.categories[table.labels()[i]].clone(),
                teacher: schema.label.categories[t].clone(),
                fired_rule: bundle.as_ref().map(|b| b.rule_list.fire(x)),
            })
            .collect();
        let columns: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
        Ok(Json(json!({
            "v": rulematrix_core::PAYLOAD_VERSION,
            "dataset": display.name(),
            "total": indices.len(),
            "offset": offset,
            "limit": limit,
            "columns": columns,
            "rows": items,
        })))
    })
    .await
}
