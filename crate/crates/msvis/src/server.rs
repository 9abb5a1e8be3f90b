//! HTTP API: system registry, views, filters, metrics and simulation
//! playback over Server-Sent Events.
//!
//! Each registered system is an immutable [`System`] snapshot behind an
//! `Arc`. Readers clone the `Arc` and work without holding any lock; trace
//! ingestion builds a new snapshot and swaps it in, serialized per system.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures::stream::{self, Stream, StreamExt};
use msvis_core::{RunState, SimError, SimulationConfig, SimulationRun, Span, TraceSet, ViewError};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::format::to_json;
use crate::ingest::{parse_manifest_bytes, parse_traces, IngestError};
use crate::session::{parse_level, MetricKind, QueryError, System, DEFAULT_SEED};

pub const DEFAULT_PORT: u16 = 7400;
const BODY_LIMIT: usize = 256 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = to_json(&ErrorBody {
            error: self.kind,
            message: &self.message,
        });
        (self.status, json_headers(), body).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(err: IngestError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, err.kind(), err.to_string())
    }
}

impl From<QueryError> for ApiError {
    fn from(err: QueryError) -> Self {
        let message = err.to_string();
        match err {
            QueryError::View(ViewError::UnknownNode(_)) => Self::not_found("UnknownNode", message),
            QueryError::View(ViewError::UnknownService(_)) => {
                Self::not_found("UnknownService", message)
            }
            QueryError::View(ViewError::UnknownEndpoint { .. }) => {
                Self::not_found("UnknownEndpoint", message)
            }
            QueryError::View(ViewError::PathNotInGraph(_))
            | QueryError::Simulation(SimError::PathNotInGraph(_)) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "PathNotInGraph", message)
            }
            QueryError::Path(_) => Self::new(StatusCode::BAD_REQUEST, "BadPath", message),
            QueryError::Simulation(SimError::UnknownTrace(_)) => {
                Self::not_found("UnknownTrace", message)
            }
            QueryError::Simulation(SimError::EmptyTraceSet) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "EmptyTraceSet", message)
            }
            QueryError::Simulation(SimError::InvalidConfig(_)) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidConfig", message)
            }
        }
    }
}

fn json_headers() -> [(header::HeaderName, HeaderValue); 1] {
    [(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json"),
    )]
}

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, json_headers(), to_json(value)).into_response()
}

struct SystemEntry {
    snapshot: RwLock<Arc<System>>,
    /// Serializes snapshot replacement for this system.
    write: tokio::sync::Mutex<()>,
    simulations: Mutex<BTreeMap<String, Arc<SimulationRun>>>,
}

impl SystemEntry {
    fn new(system: System) -> Self {
        SystemEntry {
            snapshot: RwLock::new(Arc::new(system)),
            write: tokio::sync::Mutex::new(()),
            simulations: Mutex::new(BTreeMap::new()),
        }
    }

    fn current(&self) -> Arc<System> {
        self.snapshot
            .read()
            .expect("snapshot lock poisoned")
            .clone()
    }
}

#[derive(Default)]
pub struct AppState {
    systems: RwLock<BTreeMap<String, Arc<SystemEntry>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a system; fails if its id is taken.
    pub fn register(&self, system: System) -> Result<String, Box<System>> {
        let mut systems = self.systems.write().expect("registry lock poisoned");
        if systems.contains_key(&system.id) {
            return Err(Box::new(system));
        }
        let id = system.id.clone();
        systems.insert(id.clone(), Arc::new(SystemEntry::new(system)));
        Ok(id)
    }

    fn entry(&self, id: &str) -> Result<Arc<SystemEntry>, ApiError> {
        self.systems
            .read()
            .expect("registry lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownSystem", format!("unknown system `{id}`")))
    }

    fn system(&self, id: &str) -> Result<Arc<System>, ApiError> {
        Ok(self.entry(id)?.current())
    }

    pub fn systems(&self) -> Vec<Arc<System>> {
        self.systems
            .read()
            .expect("registry lock poisoned")
            .values()
            .map(|e| e.current())
            .collect()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/systems", get(list_systems).post(create_system))
        .route("/api/systems/{id}", get(get_system))
        .route("/api/systems/{id}/traces", post(ingest_traces))
        .route("/api/systems/{id}/views/{level}", get(get_view))
        .route(
            "/api/systems/{id}/views/function/{service}",
            get(get_function_view),
        )
        .route("/api/systems/{id}/filter/node/{node}", get(get_node_filter))
        .route("/api/systems/{id}/filter/path", get(get_path_filter))
        .route("/api/systems/{id}/metrics/{metric}", get(get_metrics))
        .route("/api/systems/{id}/simulations", post(create_simulation))
        .route("/api/systems/{id}/simulations/{sim}", get(get_simulation))
        .route(
            "/api/systems/{id}/simulations/{sim}/events",
            get(simulation_events),
        )
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Adds CORS headers for the given UI origin.
pub fn with_cors(router: Router, ui_origin: &str) -> Result<Router, String> {
    let origin = HeaderValue::from_str(ui_origin).map_err(|e| format!("bad --ui-origin: {e}"))?;
    Ok(router.layer(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods(Any)
            .allow_headers(Any),
    ))
}

async fn list_systems(State(state): State<Arc<AppState>>) -> Response {
    let summaries: Vec<_> = state.systems().iter().map(|s| s.summary()).collect();
    json(StatusCode::OK, &summaries)
}

#[derive(Serialize)]
struct Created<'a> {
    system_id: &'a str,
}

async fn create_system(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let manifest = parse_manifest_bytes(&body)?;
    let system = System::new(manifest)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "DanglingCallTarget", e.to_string()))?;
    match state.register(system) {
        Ok(id) => Ok(json(StatusCode::CREATED, &Created { system_id: &id })),
        Err(dup) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "DuplicateSystem",
            format!("system `{}` is already registered", dup.id),
        )),
    }
}

async fn get_system(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    Ok(json(StatusCode::OK, &state.system(&id)?.summary()))
}

#[derive(Serialize)]
struct IngestReport {
    traces: usize,
    paths: usize,
    malformed_count: u64,
    orphan_count: u64,
    warnings: usize,
}

async fn ingest_traces(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    let batch = parse_traces(&body[..])?;
    let _guard = entry.write.lock().await;
    let next = entry.current().with_traces(&batch);
    *entry.snapshot.write().expect("snapshot lock poisoned") = Arc::new(next);
    Ok(json(
        StatusCode::OK,
        &IngestReport {
            traces: batch.traces.len(),
            paths: batch.paths.len(),
            malformed_count: batch.malformed_count,
            orphan_count: batch.orphan_count,
            warnings: batch.warnings.len(),
        },
    ))
}

#[derive(Deserialize)]
struct ViewQuery {
    layout_seed: Option<u64>,
    level: Option<String>,
    path: Option<String>,
    endpoint: Option<String>,
    top: Option<usize>,
}

impl ViewQuery {
    fn seed(&self) -> u64 {
        self.layout_seed.unwrap_or(DEFAULT_SEED)
    }

    fn level(&self) -> Result<msvis_core::Level, ApiError> {
        let raw = self.level.as_deref().unwrap_or("service");
        parse_level(raw)
            .ok_or_else(|| ApiError::not_found("UnknownLevel", format!("unknown level `{raw}`")))
    }
}

async fn get_view(
    State(state): State<Arc<AppState>>,
    UrlPath((id, level)): UrlPath<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let system = state.system(&id)?;
    let level = parse_level(&level)
        .ok_or_else(|| ApiError::not_found("UnknownLevel", format!("unknown level `{level}`")))?;
    Ok(json(StatusCode::OK, &system.view(level, q.seed())))
}

async fn get_function_view(
    State(state): State<Arc<AppState>>,
    UrlPath((id, service)): UrlPath<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let system = state.system(&id)?;
    let fv = system.function_view(&service, q.endpoint.as_deref())?;
    Ok(json(StatusCode::OK, &fv))
}

async fn get_node_filter(
    State(state): State<Arc<AppState>>,
    UrlPath((id, node)): UrlPath<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let system = state.system(&id)?;
    let view = system.node_filter(q.level()?, &node, q.seed())?;
    Ok(json(StatusCode::OK, &view))
}

async fn get_path_filter(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let system = state.system(&id)?;
    let path = q.path.as_deref().ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "BadPath",
            "missing `path` query parameter",
        )
    })?;
    let view = system.path_filter(q.level()?, path, q.seed())?;
    Ok(json(StatusCode::OK, &view))
}

async fn get_metrics(
    State(state): State<Arc<AppState>>,
    UrlPath((id, metric)): UrlPath<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let system = state.system(&id)?;
    let metric: MetricKind = metric
        .parse()
        .map_err(|e: String| ApiError::not_found("UnknownMetric", e))?;
    Ok(json(StatusCode::OK, &system.metrics(metric, q.top)))
}

#[derive(Serialize)]
struct SimCreated<'a> {
    sim_id: &'a str,
    state: RunState,
}

async fn create_simulation(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    let config: SimulationConfig = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidConfig",
            format!("invalid simulation config: {e}"),
        )
    })?;
    let mut run = entry.current().simulate(&config)?;
    let mut sims = entry.simulations.lock().expect("simulation lock poisoned");
    run.id = format!("sim-{}", sims.len() + 1);
    let sim_id = run.id.clone();
    let run_state = run.state;
    sims.insert(sim_id.clone(), Arc::new(run));
    Ok(json(
        StatusCode::CREATED,
        &SimCreated {
            sim_id: &sim_id,
            state: run_state,
        },
    ))
}

fn simulation(entry: &SystemEntry, sim: &str) -> Result<Arc<SimulationRun>, ApiError> {
    entry
        .simulations
        .lock()
        .expect("simulation lock poisoned")
        .get(sim)
        .cloned()
        .ok_or_else(|| {
            ApiError::not_found("UnknownSimulation", format!("unknown simulation `{sim}`"))
        })
}

async fn get_simulation(
    State(state): State<Arc<AppState>>,
    UrlPath((id, sim)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = state.entry(&id)?;
    Ok(json(StatusCode::OK, &*simulation(&entry, &sim)?))
}

#[derive(Serialize)]
struct TerminalState<'a> {
    sim_id: &'a str,
    state: RunState,
}

/// SSE frames for a finished run: one `sim` event per simulation event, then
/// one `state` event.
pub fn sse_frames(run: &SimulationRun) -> Vec<(&'static str, String)> {
    let mut frames: Vec<(&'static str, String)> = run
        .events
        .iter()
        .map(|e| ("sim", serde_json::to_string(e).expect("events serialize")))
        .collect();
    frames.push((
        "state",
        serde_json::to_string(&TerminalState {
            sim_id: &run.id,
            state: run.state,
        })
        .expect("state serializes"),
    ));
    frames
}

fn paced(
    frames: Vec<(&'static str, String)>,
    tick: Duration,
) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::iter(frames.into_iter().enumerate()).then(move |(i, (name, data))| async move {
        if i > 0 && !tick.is_zero() {
            tokio::time::sleep(tick).await;
        }
        Ok(Event::default().event(name).data(data))
    })
}

async fn simulation_events(
    State(state): State<Arc<AppState>>,
    UrlPath((id, sim)): UrlPath<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    let entry = state.entry(&id)?;
    let run = simulation(&entry, &sim)?;
    let tick = Duration::from_millis(run.config.tick_ms);
    Ok(Sse::new(paced(sse_frames(&run), tick)).keep_alive(KeepAlive::default()))
}

#[derive(Serialize, Deserialize)]
struct SnapshotSystem {
    manifest: msvis_core::ServiceManifest,
    spans: Vec<Span>,
    malformed_count: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    systems: Vec<SnapshotSystem>,
}

/// Writes every registered system (manifest plus accumulated spans) to `path`.
pub fn save_snapshot(state: &AppState, path: &Path) -> std::io::Result<()> {
    let snapshot = Snapshot {
        systems: state
            .systems()
            .iter()
            .map(|s| SnapshotSystem {
                manifest: s.manifest.clone(),
                spans: s.traces.spans().cloned().collect(),
                malformed_count: s.traces.malformed_count,
            })
            .collect(),
    };
    std::fs::write(path, to_json(&snapshot))
}

/// Restores systems saved by [`save_snapshot`]. Systems whose id is already
/// registered are skipped.
pub fn load_snapshot(state: &AppState, path: &Path) -> Result<usize, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let snapshot: Snapshot =
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut loaded = 0;
    for saved in snapshot.systems {
        saved
            .manifest
            .validate()
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let system = System::new(saved.manifest).map_err(|e| e.to_string())?;
        let traces = TraceSet::from_spans(saved.spans, saved.malformed_count);
        if state.register(system.with_traces(&traces)).is_ok() {
            loaded += 1;
        }
    }
    Ok(loaded)
}

pub struct ServeOptions {
    pub port: u16,
    pub ui_origin: Option<String>,
    pub snapshot: Option<PathBuf>,
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

/// Binds and serves until ctrl-c or SIGTERM. Returns an error message on bind failure.
pub async fn serve(state: Arc<AppState>, opts: ServeOptions) -> Result<(), String> {
    if let Some(path) = &opts.snapshot {
        if path.exists() {
            let n = load_snapshot(&state, path)?;
            tracing::info!(systems = n, path = %path.display(), "restored snapshot");
        }
    }
    let mut app = router(state.clone());
    if let Some(origin) = &opts.ui_origin {
        app = with_cors(app, origin)?;
    }
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", opts.port))
        .await
        .map_err(|e| format!("cannot bind port {}: {e}", opts.port))?;
    tracing::info!(port = opts.port, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|e| e.to_string())?;
    if let Some(path) = &opts.snapshot {
        save_snapshot(&state, path).map_err(|e| format!("{}: {e}", path.display()))?;
        tracing::info!(path = %path.display(), "saved snapshot");
    }
    Ok(())
}
