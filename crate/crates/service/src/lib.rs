//! Local HTTP API over a loaded model: encode, render, mix, and asynchronous
//! fit / color-edit jobs, plus a newline-delimited JSON render stream.
//!
//! Inference is serialized behind a FIFO gate. Requests beyond
//! [`ServiceConfig::queue_limit`] waiting renders are refused with 409.

pub mod error;
pub mod jobs;
pub mod multipart;
pub mod schema;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::StreamExt;
use serde_json::{json, Map, Value};
use stylemorpheus::applications::ColorEditRequest;
use stylemorpheus::codes::{mix_codes, SemanticCode};
use stylemorpheus::data_io::image_io::{decode_rgb, encode_png_rgb};
use stylemorpheus::imaging::resize_bicubic;
use stylemorpheus::{CameraPose, Model};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, Mutex};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;
use jobs::{Job, JobKind, JobRegistry, JobSpec};
use schema::*;

pub const LATENCY_HEADER: &str = "x-render-latency-ms";
pub const MAX_RENDER_SIZE: usize = 1024;
pub const MAX_JOB_STEPS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Renders allowed to wait for the model at once.
    pub queue_limit: usize,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { queue_limit: 8, cors_origins: Vec::new() }
    }
}

struct Loaded {
    model: Arc<Model>,
    jobs: Arc<JobRegistry>,
}

#[derive(Clone)]
struct AppState {
    loaded: Option<Arc<Loaded>>,
    gate: Arc<Mutex<()>>,
    renders: Arc<AtomicUsize>,
    queue_limit: usize,
}

impl AppState {
    fn loaded(&self) -> Result<&Arc<Loaded>, ApiError> {
        self.loaded.as_ref().ok_or_else(ApiError::no_model)
    }
}

/// Counts a render as in flight for its whole lifetime, including the wait.
struct RenderTicket(Arc<AtomicUsize>);

impl RenderTicket {
    fn acquire(counter: &Arc<AtomicUsize>, limit: usize) -> Result<Self, ApiError> {
        let prev = counter.fetch_add(1, Ordering::SeqCst);
        let ticket = Self(counter.clone());
        if prev >= limit {
            return Err(ApiError::busy());
        }
        Ok(ticket)
    }
}

impl Drop for RenderTicket {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Builds the router. The model is shared read-only; no request changes it.
pub fn app(model: Option<Arc<Model>>, cfg: ServiceConfig) -> Router {
    let renders = Arc::new(AtomicUsize::new(0));
    let loaded = model.map(|model| {
        let jobs = JobRegistry::start(model.clone(), renders.clone());
        Arc::new(Loaded { model, jobs })
    });
    let state = AppState { loaded, gate: Arc::new(Mutex::new(())), renders, queue_limit: cfg.queue_limit };
    Router::new()
        .route("/health", get(health))
        .route("/render", post(render))
        .route("/encode", post(encode))
        .route("/mix", post(mix))
        .route("/jobs/fit", post(submit_fit))
        .route("/jobs/color-edit", post(submit_color_edit))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/image", get(job_image))
        .route("/stream", post(stream))
        .layer(cors(&cfg.cors_origins))
        .with_state(state)
}

fn cors(origins: &[String]) -> CorsLayer {
    let allow = if origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
        .expose_headers([HeaderName::from_static(LATENCY_HEADER)])
}

/// Serves on an already bound listener until the process ends.
pub async fn serve(listener: TcpListener, model: Option<Arc<Model>>, cfg: ServiceConfig) -> std::io::Result<()> {
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app(model, cfg)).await
}

async fn health(State(st): State<AppState>) -> Result<Json<Value>, ApiError> {
    let l = st.loaded()?;
    Ok(Json(json!({ "status": "ok", "model": l.model.summary() })))
}

/// Runs `f` on the blocking pool once the model gate is ours.
async fn with_model<T: Send + 'static>(
    st: &AppState,
    f: impl FnOnce(&Model) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let model = st.loaded()?.model.clone();
    let _gate = st.gate.lock().await;
    tokio::task::spawn_blocking(move || f(&model))
        .await
        .map_err(|e| ApiError::internal(format!("inference task failed: {e}")))?
}

struct RenderJob {
    code: SemanticCode,
    pose: CameraPose,
    size: usize,
}

/// Reads `{code | fit, pose, size}`. `fallback` supplies the code when a
/// stream line omits both sources.
fn parse_render(
    l: &Loaded,
    obj: &Map<String, Value>,
    fallback: Option<&SemanticCode>,
) -> Result<RenderJob, ApiError> {
    let cfg = &l.model.config;
    let code = code_source(l, obj, fallback)?;
    let pose = parse_pose(obj.get("pose"), cfg.camera_radius)?;
    let size = parse_usize(obj.get("size"), "size", cfg.final_res(), MAX_RENDER_SIZE)?;
    if size == 0 {
        return Err(ApiError::bad_request("size", "must be positive"));
    }
    Ok(RenderJob { code, pose, size })
}

/// Exactly one of `code` (inline) or `fit` (a finished job id).
fn code_source(
    l: &Loaded,
    obj: &Map<String, Value>,
    fallback: Option<&SemanticCode>,
) -> Result<SemanticCode, ApiError> {
    match (obj.get("code"), obj.get("fit")) {
        (Some(_), Some(_)) => Err(ApiError::bad_request("code", "give either code or fit, not both")),
        (Some(c), None) => parse_code(Some(c), "code", &l.model.config.codes),
        (None, Some(f)) => {
            let id = f.as_u64().ok_or_else(|| ApiError::bad_request("fit", "expected a job id"))?;
            l.jobs.code(id).ok_or_else(|| ApiError::bad_request("fit", format!("job {id} has no finished code")))
        }
        (None, None) => fallback.cloned().ok_or_else(|| ApiError::bad_request("code", "missing")),
    }
}

async fn render_png(st: &AppState, job: RenderJob) -> Result<(Vec<u8>, f64), ApiError> {
    let _ticket = RenderTicket::acquire(&st.renders, st.queue_limit)?;
    let t0 = Instant::now();
    let png = with_model(st, move |m| {
        let out = m.render(&job.code, &job.pose)?;
        Ok(encode_png_rgb(&resize_bicubic(&out.rgb, job.size, job.size)))
    })
    .await?;
    Ok((png, t0.elapsed().as_secs_f64() * 1e3))
}

fn png_response(png: Vec<u8>, latency_ms: Option<f64>) -> Response {
    let mut res = ([(header::CONTENT_TYPE, "image/png")], png).into_response();
    if let Some(ms) = latency_ms {
        if let Ok(v) = HeaderValue::from_str(&format!("{ms:.3}")) {
            res.headers_mut().insert(LATENCY_HEADER, v);
        }
    }
    res
}

async fn render(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let obj = parse_body(&body)?;
    let job = parse_render(st.loaded()?, &obj, None)?;
    let (png, ms) = render_png(&st, job).await?;
    Ok(png_response(png, Some(ms)))
}

/// The image comes from a multipart field named `image`, or is the raw body.
fn upload_bytes(headers: &HeaderMap, body: &Bytes) -> Result<Vec<u8>, ApiError> {
    let ctype = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("");
    if !ctype.to_ascii_lowercase().starts_with("multipart/") {
        return Ok(body.to_vec());
    }
    let b = multipart::boundary(ctype)
        .ok_or_else(|| ApiError::bad_request("image", "multipart upload without a boundary"))?;
    multipart::parse(body, &b)
        .into_iter()
        .find(|p| p.name.as_deref() == Some("image"))
        .map(|p| p.data.to_vec())
        .ok_or_else(|| ApiError::bad_request("image", "no form field named image"))
}

async fn encode(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Json<SemanticCode>, ApiError> {
    let l = st.loaded()?;
    let image = decode_rgb(&upload_bytes(&headers, &body)?).map_err(|e| ApiError::bad_request("image", e.to_string()))?;
    let res = l.model.config.final_res();
    if image.dim(0) != res || image.dim(1) != res {
        return Err(ApiError::bad_request(
            "image",
            format!("expected {res}x{res} pixels, got {}x{}", image.dim(1), image.dim(0)),
        ));
    }
    let _ticket = RenderTicket::acquire(&st.renders, st.queue_limit)?;
    let code = with_model(&st, move |m| Ok(m.encode(&image)?)).await?;
    Ok(Json(code))
}

async fn mix(State(st): State<AppState>, body: Bytes) -> Result<Json<SemanticCode>, ApiError> {
    let l = st.loaded()?;
    let obj = parse_body(&body)?;
    let dims = &l.model.config.codes;
    let source = parse_code(obj.get("source"), "source", dims)?;
    let target = parse_code(obj.get("target"), "target", dims)?;
    let groups = parse_groups(obj.get("groups"))?;
    Ok(Json(mix_codes(&source, &target, &groups)?))
}

fn accepted(job: Job) -> Response {
    (StatusCode::ACCEPTED, Json(job)).into_response()
}

async fn submit_fit(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let l = st.loaded()?;
    let obj = parse_body(&body)?;
    let radius = l.model.config.camera_radius;
    let image = parse_image(obj.get("image"), "image")?;
    let mask = parse_mask(obj.get("mask"), "mask")?;
    let pose = match (obj.get("pose"), obj.get("face_angles")) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("pose", "give either pose or face_angles")),
        (_, Some(a)) => parse_face_angles(a, radius)?,
        (p, None) => parse_pose(p, radius)?,
    };
    let steps = parse_usize(obj.get("steps"), "steps", 200, MAX_JOB_STEPS)?;
    let spec = JobSpec::Fit { image, mask, pose, steps };
    Ok(accepted(l.jobs.submit(JobKind::Fit, steps, spec)))
}

async fn submit_color_edit(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let l = st.loaded()?;
    let obj = parse_body(&body)?;
    let code = code_source(l, &obj, None)?;
    let pose = parse_pose(obj.get("pose"), l.model.config.camera_radius)?;
    let part = parse_mask(obj.get("mask"), "mask")?;
    let color = parse_color(obj.get("color"))?;
    let mut req = ColorEditRequest::new(code, pose, part, color);
    req.steps = parse_usize(obj.get("steps"), "steps", req.steps, MAX_JOB_STEPS)?;
    let steps = req.steps;
    Ok(accepted(l.jobs.submit(JobKind::ColorEdit, steps, JobSpec::ColorEdit(req))))
}

fn job_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found(format!("no job {raw}")))
}

async fn job_status(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Job>, ApiError> {
    let l = st.loaded()?;
    let id = job_id(&id)?;
    l.jobs.get(id).map(Json).ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}

async fn job_image(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let l = st.loaded()?;
    let id = job_id(&id)?;
    if l.jobs.get(id).is_none() {
        return Err(ApiError::not_found(format!("no job {id}")));
    }
    let png = l.jobs.image(id).ok_or_else(|| ApiError::not_found(format!("job {id} has no image yet")))?;
    Ok(png_response(png, None))
}

/// One stream line: the frame or the error, tagged with the line index.
async fn stream_frame(st: &AppState, index: usize, line: &[u8], last: &mut Option<SemanticCode>) -> Value {
    let frame = async {
        let obj = parse_body(line)?;
        let job = parse_render(st.loaded()?, &obj, last.as_ref())?;
        *last = Some(job.code.clone());
        render_png(st, job).await
    };
    match frame.await {
        Ok((png, ms)) => json!({ "index": index, "png": encode_base64(&png), "latency_ms": ms }),
        Err(e) => json!({ "index": index, "error": e.kind, "field": e.field, "message": e.message }),
    }
}

/// Newline-delimited render requests in, newline-delimited frames out. A line
/// without `code` or `fit` reuses the previous line's code.
async fn stream(State(st): State<AppState>, body: Body) -> Result<Response, ApiError> {
    st.loaded()?;
    let (tx, rx) = mpsc::channel::<Bytes>(4);
    tokio::spawn(async move {
        let mut input = body.into_data_stream();
        let mut buf: Vec<u8> = Vec::new();
        let mut index = 0;
        let mut last = None;
        let mut done = false;
        while !done {
            match input.next().await {
                Some(Ok(chunk)) => buf.extend_from_slice(&chunk),
                Some(Err(_)) | None => {
                    done = true;
                    buf.push(b'\n');
                }
            }
            while let Some(nl) = buf.iter().position(|&b| b == b'\n') {
                let line: Vec<u8> = buf.drain(..=nl).collect();
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                let mut out = stream_frame(&st, index, &line, &mut last).await.to_string();
                out.push('\n');
                index += 1;
                if tx.send(Bytes::from(out)).await.is_err() {
                    return;
                }
            }
        }
    });
    let frames = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, std::convert::Infallible>(b), rx))
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(frames)).into_response())
}
