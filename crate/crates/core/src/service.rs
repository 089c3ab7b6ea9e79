//! HTTP API over a dataset directory for reviewing and correcting labels.
//!
//! Writes are guarded by a content-hash revision token and serialized per
//! program; the `.scad` file stays the single source of truth.

use std::collections::{BTreeMap, HashMap};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::blocks::{insert_comments, read_ground_truth, BlockAssignment, BlockId};
use crate::config::{RenderConfig, ServiceConfig};
use crate::dataset::{Manifest, ManifestEntry};
use crate::pipeline::{render_view, ViewRender};
use crate::program::Program;
use crate::render::{encode_depth_8bit, mask_to_png};
use crate::scad::SourceFile;

pub struct AppState {
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub render: RenderConfig,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    views: Mutex<HashMap<(String, String, usize), Arc<ViewRender>>>,
}

impl AppState {
    pub fn new(data_dir: PathBuf, static_dir: Option<PathBuf>, render: RenderConfig) -> Self {
        AppState { data_dir, static_dir, render, locks: Mutex::default(), views: Mutex::default() }
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks.lock().expect("lock table poisoned").entry(id.to_string()).or_default().clone()
    }
}

pub fn revision(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn entry(state: &AppState, id: &str) -> ApiResult<ManifestEntry> {
    let m = Manifest::read(&state.data_dir).map_err(internal)?;
    m.get(id).cloned().ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no program `{id}`")))
}

fn load(state: &AppState, e: &ManifestEntry) -> ApiResult<Program> {
    let path = state.data_dir.join(&e.path);
    let source = SourceFile::read(&path).map_err(internal)?;
    Program::load(source).map_err(internal)
}

fn status_of(p: &Program, gt: &BlockAssignment) -> &'static str {
    let labeled = p.blocks.ids().filter(|b| !gt.labels_of(*b).is_empty()).count();
    match labeled {
        0 => "unlabeled",
        n if n == p.blocks.len() => "labeled",
        _ => "partial",
    }
}

async fn list(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let m = Manifest::read(&state.data_dir).map_err(internal)?;
    let mut out = Vec::new();
    for e in &m.entries {
        let status = match load(&state, e) {
            Ok(p) => match read_ground_truth(&p.source, &p.blocks) {
                Ok(gt) => status_of(&p, &gt),
                Err(_) => "invalid",
            },
            Err(_) => "invalid",
        };
        out.push(json!({ "id": e.id, "track": e.track, "category": e.category, "lines": e.lines, "status": status }));
    }
    Ok(Json(Value::Array(out)))
}

fn program_json(state: &AppState, e: &ManifestEntry, p: &Program) -> ApiResult<Value> {
    let gt = read_ground_truth(&p.source, &p.blocks).map_err(internal)?;
    let mut blocks = p.blocks.to_json();
    if let Value::Array(items) = &mut blocks {
        for (item, b) in items.iter_mut().zip(&p.blocks.blocks) {
            item["labels"] = json!(gt.labels_of(b.id));
        }
    }
    let labels: BTreeMap<String, &[String]> = gt.labeled().map(|(b, l)| (b.to_string(), l)).collect();
    let base = format!("/api/programs/{}/renders", e.id);
    let renders: Vec<Value> = (0..state.render.views)
        .map(|v| {
            let masks: BTreeMap<String, String> = p.blocks.ids().map(|b| (b.to_string(), format!("{base}/mask_{v}_{b}.png"))).collect();
            json!({ "view": v, "depth": format!("{base}/depth_{v}.png"), "masks": masks })
        })
        .collect();
    Ok(json!({
        "id": e.id,
        "track": e.track,
        "category": e.category,
        "source": p.source.text,
        "revision": revision(&p.source.text),
        "blocks": blocks,
        "labels": labels,
        "label_set": e.labels,
        "renders": renders,
    }))
}

async fn show(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    let p = load(&state, &e)?;
    Ok(Json(program_json(&state, &e, &p)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelUpdate {
    revision: String,
    labels: BTreeMap<u32, Vec<String>>,
}

/// Labels must survive a round trip through a generated comment.
fn valid_label(l: &str) -> bool {
    !l.is_empty() && l == l.trim() && l.chars().all(|c| c.is_ascii_lowercase() || c == ' ')
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("scad.tmp{}", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

async fn update(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    let req: LabelUpdate = serde_json::from_slice(&body).map_err(|err| ApiError(StatusCode::UNPROCESSABLE_ENTITY, err.to_string()))?;
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;

    let p = load(&state, &e)?;
    if revision(&p.source.text) != req.revision {
        return Err(ApiError(StatusCode::CONFLICT, "stale revision; reload and retry".into()));
    }
    let mut gt = read_ground_truth(&p.source, &p.blocks).map_err(internal)?;
    for (b, labels) in &req.labels {
        if *b as usize >= p.blocks.len() {
            return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("no block {b}")));
        }
        let labels: Vec<String> = labels.iter().map(|l| l.trim().to_lowercase()).collect();
        if labels.is_empty() || !labels.iter().all(|l| valid_label(l)) {
            return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("block {b}: labels must be non-empty lowercase words")));
        }
        gt.set(BlockId(*b), labels);
    }
    let (next, _) = insert_comments(&p.source, &p.blocks, &gt);
    let reparsed = Program::load(next.clone()).map_err(internal)?;
    if !reparsed.blocks.same_structure(&p.blocks) {
        return Err(internal("edit would change the block structure"));
    }
    write_atomic(&state.data_dir.join(&e.path), &next.text).map_err(internal)?;
    Ok(Json(json!({ "source": next.text, "revision": revision(&next.text) })))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn render(State(state): State<Arc<AppState>>, UrlPath((id, file)): UrlPath<(String, String)>) -> ApiResult<Response> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no render `{file}`"));
    let stem = file.strip_suffix(".png").ok_or_else(not_found)?;
    let parts: Vec<&str> = stem.split('_').collect();
    let (view, block) = match parts.as_slice() {
        ["depth", v] => (v.parse::<usize>().map_err(|_| not_found())?, None),
        ["mask", v, b] => (v.parse().map_err(|_| not_found())?, Some(BlockId(b.parse().map_err(|_| not_found())?))),
        _ => return Err(not_found()),
    };
    if view >= state.render.views {
        return Err(not_found());
    }
    let e = entry(&state, &id)?;
    let p = load(&state, &e)?;
    if block.is_some_and(|b| b.index() >= p.blocks.len()) {
        return Err(not_found());
    }
    let key = (id.clone(), revision(&p.source.text), view);
    let cached = state.views.lock().expect("view cache poisoned").get(&key).cloned();
    let vr = match cached {
        Some(v) => v,
        None => {
            let cfg = state.render.clone();
            let vr = tokio::task::spawn_blocking(move || -> Result<ViewRender, String> {
                let shape = p.shape().map_err(|e| e.to_string())?;
                let ring = cfg.ring_spec().ring(&shape.root_bounds()).map_err(|e| e.to_string())?;
                Ok(render_view(&shape, &p.blocks, &ring.cameras[view], cfg.closing_iterations))
            })
            .await
            .map_err(internal)?
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e))?;
            let vr = Arc::new(vr);
            state.views.lock().expect("view cache poisoned").insert(key, vr.clone());
            vr
        }
    };
    let bytes = match block {
        None => encode_depth_8bit(&vr.depth).to_png().map_err(internal)?,
        Some(b) => mask_to_png(&vr.masks[&b]).map_err(internal)?,
    };
    Ok(png(bytes))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): State<Arc<AppState>>, UrlPath(rel): UrlPath<String>) -> ApiResult<Response> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no static file `{rel}`"));
    let root = state.static_dir.as_ref().ok_or_else(not_found)?;
    let rel_path = Path::new(&rel);
    if !rel_path.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(not_found());
    }
    let path = root.join(rel_path);
    let bytes = tokio::fs::read(&path).await.map_err(|_| not_found())?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/programs", get(list))
        .route("/api/programs/{id}", get(show))
        .route("/api/programs/{id}/labels", post(update))
        .route("/api/programs/{id}/renders/{file}", get(render))
        .route("/static/{*path}", get(static_file))
        .with_state(state)
}

/// Serves on an already-bound listener until the future is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub fn serve_blocking(svc: &ServiceConfig, render: &RenderConfig) -> Result<(), String> {
    Manifest::read(&svc.data_dir).map_err(|e| e.to_string())?;
    let state = Arc::new(AppState::new(svc.data_dir.clone(), svc.static_dir.clone(), render.clone()));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", svc.port)).await.map_err(|e| e.to_string())?;
        log::info!("listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
        serve_on(listener, state).await.map_err(|e| e.to_string())
    })
}
