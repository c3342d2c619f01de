//! HTTP facade over a loaded [`Pipeline`]: in-memory authoring sessions,
//! per-word tags, synchronous composition and canvas downloads.
//!
//! Canvases are written under the configured directory as
//! `{canvas_id}/{labels.png,color.png,provenance.json,meta.json}`, the same
//! files the batch `compose` command writes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use scenecomp_core::compose::{write_canvas, ComposeConfig, Composition, Pipeline, CANVAS_FILES};
use scenecomp_core::corpus::{normalize_narrative, tokenize, validate_narrative, validate_trace, Scene, TimedWord, TracePoint};
use scenecomp_core::error::Error;
use scenecomp_core::render::Palette;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

/// Per-word slot used when typed words have no trace time range to spread over.
pub const STAMP_STEP_MS: u64 = 300;

const INDEX_HTML: &str = include_str!("../ui/index.html");
const APP_JS: &str = include_str!("../ui/app.js");

/// Overrides of the server's compose defaults; absent fields keep the default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub k: Option<usize>,
    pub gap_ms: Option<u64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, base: &ComposeConfig) -> ComposeConfig {
        ComposeConfig {
            k: self.k.unwrap_or(base.k),
            gap_ms: self.gap_ms.unwrap_or(base.gap_ms),
            width: self.width.unwrap_or(base.width),
            height: self.height.unwrap_or(base.height),
            ..base.clone()
        }
    }

    fn merged(&self, over: &Overrides) -> Overrides {
        Overrides {
            k: over.k.or(self.k),
            gap_ms: over.gap_ms.or(self.gap_ms),
            width: over.width.or(self.width),
            height: over.height.or(self.height),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Session {
    pub trace: Vec<TracePoint>,
    pub narrative: Vec<TimedWord>,
    pub overrides: Overrides,
    pub last_canvas: Option<String>,
}

pub struct AppState {
    pipeline: Pipeline,
    palette: Palette,
    defaults: ComposeConfig,
    canvas_dir: PathBuf,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, palette: Palette, defaults: ComposeConfig, canvas_dir: PathBuf) -> Arc<Self> {
        Arc::new(AppState { pipeline, palette, defaults, canvas_dir, sessions: RwLock::new(HashMap::new()) })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let missing = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
        let uuid = Uuid::parse_str(id).map_err(|_| missing())?;
        self.sessions.read().expect("session table poisoned").get(&uuid).cloned().ok_or_else(missing)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } | Error::Json { .. } | Error::Image { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses an optional JSON body; an empty body yields the default.
fn optional_body<T: Default + for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid payload: {e}")))
}

fn required_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid payload: {e}")))
}

/// Spreads typed words uniformly over the trace's time range, or over
/// consecutive [`STAMP_STEP_MS`] slots from zero when there is no trace.
pub fn auto_stamp(text: &str, trace: &[TracePoint]) -> Vec<TimedWord> {
    let words = tokenize(text);
    let n = words.len() as u64;
    let (t0, span) = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) if b.t_ms > a.t_ms => (a.t_ms, b.t_ms - a.t_ms),
        (Some(a), _) => (a.t_ms, STAMP_STEP_MS * n),
        _ => (0, STAMP_STEP_MS * n),
    };
    words
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let i = i as u64;
            TimedWord::new(w, t0 + span * i / n, t0 + span * (i + 1) / n)
        })
        .collect()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/trace", post(append_trace))
        .route("/sessions/{id}/narrative", axum::routing::put(put_narrative))
        .route("/sessions/{id}/tags", get(get_tags))
        .route("/sessions/{id}/compose", post(compose))
        .route("/canvases/{canvas_id}/{file}", get(canvas_file))
        .route("/labels", get(labels))
        .route("/config", get(config))
        .route("/ui", get(ui_index))
        .route("/ui/", get(ui_index))
        .route("/ui/app.js", get(ui_script))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn create_session(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let overrides: Overrides = optional_body(&body)?;
    let id = Uuid::new_v4();
    let session = Session { overrides, ..Default::default() };
    s.sessions.write().expect("session table poisoned").insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "id": id.to_string() }))))
}

async fn get_session(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = s.session(&id)?;
    let g = session.lock().expect("session poisoned");
    Ok(Json(json!({
        "id": id,
        "trace_points": g.trace.len(),
        "narrative": g.narrative,
        "overrides": g.overrides,
        "last_canvas": g.last_canvas,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceBody {
    points: Vec<TracePoint>,
}

async fn append_trace(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let session = s.session(&id)?;
    let TraceBody { points } = required_body(&body)?;
    let mut g = session.lock().expect("session poisoned");
    let mut joined = g.trace.clone();
    joined.extend(points);
    validate_trace(&joined)?;
    g.trace = joined;
    Ok(Json(json!({ "trace_points": g.trace.len() })))
}

#[derive(Deserialize)]
enum StampMode {
    #[serde(rename = "auto-stamp")]
    AutoStamp,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NarrativeBody {
    Words {
        words: Vec<TimedWord>,
    },
    Text {
        text: String,
        #[allow(dead_code)]
        mode: StampMode,
    },
}

async fn put_narrative(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let session = s.session(&id)?;
    let body: NarrativeBody = serde_json::from_slice(&body).map_err(|_| {
        ApiError::bad_request(r#"expected {"words": [{"word", "start_ms", "end_ms"}]} or {"text", "mode": "auto-stamp"}"#)
    })?;
    let mut g = session.lock().expect("session poisoned");
    let words = match body {
        NarrativeBody::Words { words } => normalize_narrative(words),
        NarrativeBody::Text { text, .. } => auto_stamp(&text, &g.trace),
    };
    validate_narrative(&words, false)?;
    g.narrative = words;
    Ok(Json(json!({ "words": g.narrative })))
}

async fn get_tags(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let session = s.session(&id)?;
    let words: Vec<String> = session.lock().expect("session poisoned").narrative.iter().map(|w| w.text.clone()).collect();
    let tags = if words.is_empty() { Vec::new() } else { s.pipeline.tag(&words)? };
    let tax = s.pipeline.taxonomy();
    let rows: Vec<Value> = words.iter().zip(&tags).map(|(w, &t)| json!({ "word": w, "label": tax.name(t) })).collect();
    Ok(Json(json!({ "tags": rows })))
}

/// Writes the canvas files once per canvas id through a scratch directory,
/// so readers never see a partial canvas.
fn store_canvas(dir: &FsPath, composition: &Composition, state: &AppState) -> ApiResult<()> {
    let target = dir.join(&composition.meta.canvas_id);
    if target.join("meta.json").exists() {
        return Ok(());
    }
    let scratch = dir.join(format!(".tmp-{}", Uuid::new_v4()));
    write_canvas(&scratch, composition, state.pipeline.taxonomy(), &state.palette)?;
    if fs::rename(&scratch, &target).is_err() {
        // a concurrent compose of the same canvas won the rename
        let _ = fs::remove_dir_all(&scratch);
    }
    Ok(())
}

async fn compose(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let session = s.session(&id)?;
    let over: Overrides = optional_body(&body)?;
    let state = s.clone();
    tokio::task::spawn_blocking(move || {
        let mut g = session.lock().expect("session poisoned");
        if g.narrative.is_empty() {
            return Err(ApiError::new(StatusCode::CONFLICT, "session has no narrative to compose"));
        }
        let config = g.overrides.merged(&over).apply(&state.defaults);
        let scene = Scene::new(g.narrative.clone(), g.trace.clone(), None)?;
        let composition = state.pipeline.compose(&scene, &config)?;
        store_canvas(&state.canvas_dir, &composition, &state)?;
        let meta = &composition.meta;
        g.last_canvas = Some(meta.canvas_id.clone());
        let files: serde_json::Map<String, Value> = CANVAS_FILES
            .iter()
            .map(|f| (f.to_string(), json!(format!("/canvases/{}/{f}", meta.canvas_id))))
            .collect();
        let instances: Vec<Value> = meta
            .instances
            .iter()
            .map(|i| json!({ "class": i.class, "kind": i.kind, "words": i.words, "mask_source": i.mask_source, "iou": i.iou }))
            .collect();
        Ok(Json(json!({
            "canvas_id": meta.canvas_id,
            "classes": meta.classes,
            "background_id": meta.background_id,
            "instances": instances,
            "warnings": meta.warnings,
            "files": files,
        })))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("compose task failed: {e}")))?
}

async fn canvas_file(State(s): State<Arc<AppState>>, Path((canvas_id, file)): Path<(String, String)>) -> ApiResult<Response> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("no `{file}` for canvas `{canvas_id}`"));
    if canvas_id.is_empty() || !canvas_id.bytes().all(|b| b.is_ascii_hexdigit()) || !CANVAS_FILES.contains(&file.as_str()) {
        return Err(not_found());
    }
    let bytes = fs::read(s.canvas_dir.join(&canvas_id).join(&file)).map_err(|_| not_found())?;
    let mime = if file.ends_with(".png") { "image/png" } else { "application/json" };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn labels(State(s): State<Arc<AppState>>) -> Json<Value> {
    let tax = s.pipeline.taxonomy();
    let rows: Vec<Value> = tax
        .entries()
        .iter()
        .map(|e| json!({ "id": e.id, "name": e.name, "kind": e.kind, "excluded": e.excluded, "color": s.palette.color(e.id) }))
        .collect();
    Json(json!({ "labels": rows }))
}

async fn config(State(s): State<Arc<AppState>>) -> Json<ComposeConfig> {
    Json(s.defaults.clone())
}

async fn ui_index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

async fn ui_script() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/javascript")], APP_JS)
}
