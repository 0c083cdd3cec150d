//! HTTP and WebSocket service over a trained stroke classifier and face
//! embedding model. Models are loaded once and shared read-only; every
//! request works on its own copies of the inputs.

mod error;
mod live;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use sketchsem::harness::{
    decode_png, encode_png, fit_reference, generate_face, interpolate_faces, label_sketch, Appearance, HarnessError,
};
use sketchsem::sketch::{CategoryScheme, VectorSketch};
use sketchsem::{EmbedModel, SsiModel};
use thiserror::Error;

pub use error::{parse_body, parse_sketch, parse_value, ApiError, FieldError};

pub const REQUEST_ID_HEADER: &str = "x-request-id";
pub const MAX_INTERPOLATION_STEPS: usize = 64;
const BODY_LIMIT: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("loading {path}: {msg}")]
    Load { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Models {
    ssi: SsiModel,
    embed: EmbedModel,
    default_seed: u64,
}

/// Loaded models, cheap to clone into handlers.
#[derive(Clone)]
pub struct AppState(Arc<Models>);

impl AppState {
    /// `default_seed` is the appearance seed when a request gives neither a
    /// seed nor a reference.
    pub fn new(ssi: SsiModel, embed: EmbedModel, default_seed: u64) -> Self {
        Self(Arc::new(Models {
            ssi,
            embed,
            default_seed,
        }))
    }

    pub fn load(ssi: &Path, embed: &Path, default_seed: u64) -> Result<Self, ServeError> {
        let ssi_model = SsiModel::load(ssi).map_err(|e| ServeError::Load {
            path: ssi.to_path_buf(),
            msg: e.to_string(),
        })?;
        let embed_model = EmbedModel::load(embed).map_err(|e| ServeError::Load {
            path: embed.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(Self::new(ssi_model, embed_model, default_seed))
    }

    pub fn ssi(&self) -> &SsiModel {
        &self.0.ssi
    }

    pub fn embed(&self) -> &EmbedModel {
        &self.0.embed
    }
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub ssi: PathBuf,
    pub embed: PathBuf,
    pub seed: u64,
}

#[derive(Clone, Debug)]
struct RequestId(String);

async fn tag_request(mut req: Request, next: Next) -> Response {
    let id = uuid::Uuid::new_v4().to_string();
    req.extensions_mut().insert(RequestId(id.clone()));
    let mut res = next.run(req).await;
    if let Ok(v) = HeaderValue::from_str(&id) {
        res.headers_mut().insert(REQUEST_ID_HEADER, v);
    }
    res
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/label", post(label))
        .route("/generate", post(generate))
        .route("/interpolate", post(interpolate))
        .route("/categories", get(categories))
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/live", get(live::upgrade))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such endpoint") })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(middleware::from_fn(tag_request))
        .with_state(state)
}

/// Binds `host:port` and serves until ctrl-c.
pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let state = AppState::load(&config.ssi, &config.embed, config.seed)?;
    let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Serves on an already bound listener; returns the bound address and the
/// server task.
pub async fn spawn(state: AppState, listener: tokio::net::TcpListener) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, router(state)).await;
    });
    Ok((addr, task))
}

/// Runs model work off the async workers; panics and model errors become a
/// 500 carrying the request id.
async fn blocking<T: Send + 'static>(
    id: &RequestId,
    work: impl FnOnce() -> Result<T, HarnessError> + Send + 'static,
) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(work).await {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(ApiError::internal(format!("model failure: {e}"), &id.0)),
        Err(_) => Err(ApiError::internal("model task aborted", &id.0)),
    }
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    sketch: Value,
    #[serde(default = "yes")]
    vote: bool,
}

pub fn label_response(sketch: &VectorSketch, confidences: &[f64]) -> Value {
    let labels: Vec<Option<u8>> = sketch.strokes.iter().map(|s| s.label.map(|c| c.raw())).collect();
    json!({
        "sketch": sketch.to_json_value(),
        "labels": labels,
        "confidences": confidences,
    })
}

async fn label(State(state): State<AppState>, Extension(id): Extension<RequestId>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let mut value: Value = parse_body(&body).map_err(|e| e.with_request_id(&id.0))?;
    // A bare sketch document is accepted as well as the wrapped form.
    if value.get("canvas").is_some() && value.get("sketch").is_none() {
        value = json!({ "sketch": value });
    }
    let req: LabelRequest = parse_value(value).map_err(|e| e.with_request_id(&id.0))?;
    let sketch = parse_sketch(req.sketch, "sketch").map_err(|e| e.with_request_id(&id.0))?;
    let out = blocking(&id, move || label_sketch(state.ssi(), &sketch, req.vote)).await?;
    Ok(Json(label_response(&out.sketch, &out.confidences)))
}

fn appearance(state: &AppState, seed: Option<u64>, reference: Option<String>) -> Result<Appearance, ApiError> {
    match (seed, reference) {
        (Some(_), Some(_)) => Err(ApiError::invalid("reference", "give either seed or reference, not both")),
        (Some(s), None) => Ok(Appearance::Seed(s)),
        (None, None) => Ok(Appearance::Seed(state.0.default_seed)),
        (None, Some(text)) => {
            let b64 = text.split_once("base64,").map_or(text.as_str(), |(_, rest)| rest);
            let bytes = STANDARD
                .decode(b64.trim())
                .map_err(|e| ApiError::invalid("reference", format!("not base64: {e}")))?;
            let (w, h, rgb) = decode_png(&bytes).map_err(|e| ApiError::invalid("reference", e.to_string()))?;
            let side = state.embed().resolution();
            let rgb = fit_reference(w, h, &rgb, side).map_err(|e| ApiError::invalid("reference", e.to_string()))?;
            Ok(Appearance::Reference(rgb))
        }
    }
}

fn png_b64(side: usize, rgb: &[f64]) -> Result<String, HarnessError> {
    Ok(STANDARD.encode(encode_png(side, side, rgb)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    sketch: Value,
    seed: Option<u64>,
    reference: Option<String>,
}

async fn generate(State(state): State<AppState>, Extension(id): Extension<RequestId>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let tag = |e: ApiError| e.with_request_id(&id.0);
    let req: GenerateRequest = parse_body(&body).map_err(tag)?;
    let sketch = parse_sketch(req.sketch, "sketch").map_err(tag)?;
    let app = appearance(&state, req.seed, req.reference).map_err(tag)?;
    let side = state.embed().resolution();
    let image = blocking(&id, move || png_b64(side, &generate_face(state.embed(), &sketch, &app)?)).await?;
    Ok(Json(json!({ "image": image, "width": side, "height": side })))
}

fn default_steps() -> usize {
    8
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolateRequest {
    a: Value,
    b: Value,
    #[serde(default = "default_steps")]
    steps: usize,
    seed: Option<u64>,
    reference: Option<String>,
}

async fn interpolate(State(state): State<AppState>, Extension(id): Extension<RequestId>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let tag = |e: ApiError| e.with_request_id(&id.0);
    let req: InterpolateRequest = parse_body(&body).map_err(tag)?;
    if !(1..=MAX_INTERPOLATION_STEPS).contains(&req.steps) {
        return Err(tag(ApiError::invalid(
            "steps",
            format!("steps must be between 1 and {MAX_INTERPOLATION_STEPS}"),
        )));
    }
    let a = parse_sketch(req.a, "a").map_err(tag)?;
    let b = parse_sketch(req.b, "b").map_err(tag)?;
    let app = appearance(&state, req.seed, req.reference).map_err(tag)?;
    let side = state.embed().resolution();
    let images = blocking(&id, move || {
        interpolate_faces(state.embed(), &a, &b, req.steps, &app)?
            .iter()
            .map(|rgb| png_b64(side, rgb))
            .collect::<Result<Vec<_>, _>>()
    })
    .await?;
    Ok(Json(json!({ "images": images, "width": side, "height": side })))
}

async fn categories() -> impl IntoResponse {
    Json(CategoryScheme::standard().categories)
}
