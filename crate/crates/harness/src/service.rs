//! HTTP API consumed by the interactive workbench.
//!
//! | route | |
//! |-------|-|
//! | `GET /api/strategies` | strategy descriptors and availability |
//! | `GET /api/manifest` | dataset classes, items and default parameters |
//! | `GET /api/items/{id}/image` | item image as PNG |
//! | `POST /api/segment` | run one strategy for one class on an item or upload |
//!
//! Errors use the model-server error body, `{error: {code, message}}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use text2seg_core::backend::{wire, Capability};
use text2seg_core::dataset::{decode_gt, TileGrid};
use text2seg_core::metrics::{confusion_counts, ClassReport};
use text2seg_core::{
    Backend, BackendError, BinaryMask, ClassSpec, DatasetManifest, StrategyId, StrategyParams, StrategyTrace,
};
use text2seg_remote::ApiError;
use tower_http::cors::CorsLayer;

use crate::config::{open_backend, RunConfig};
use crate::error::{HarnessError, Result};
use crate::eval::segment_image;

#[derive(Clone)]
pub struct ServiceState {
    pub manifest: Arc<DatasetManifest>,
    pub backend: Arc<dyn Backend>,
    /// Parameters used when a request carries none.
    pub params: StrategyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub id: StrategyId,
    pub name: String,
    pub display: String,
    pub description: String,
    pub requires: Vec<Capability>,
    /// Whether the configured backend has every required capability.
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub id: String,
    pub has_gt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub name: String,
    pub tile_size: u32,
    pub ignore_index: u8,
    pub classes: Vec<ClassSpec>,
    pub items: Vec<ItemSummary>,
    pub defaults: StrategyParams,
    pub max_synonyms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentApiRequest {
    /// Manifest item id; alternative to `image_png_b64`.
    #[serde(default)]
    pub item: Option<String>,
    #[serde(default)]
    pub image_png_b64: Option<String>,
    pub label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub strategy: String,
    #[serde(default)]
    pub params: Option<StrategyParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentApiResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    pub class: ClassSpec,
    pub strategy: StrategyId,
    pub mask: BinaryMask,
    pub grid: TileGrid,
    /// One trace per tile, row-major.
    pub traces: Vec<StrategyTrace>,
    /// Scores against ground truth when the item has it and the label is a
    /// manifest class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ClassReport>,
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(BackendError::bad_request(message))
}

/// Backend failures keep their code; anything else is the caller's fault.
fn core_error(e: text2seg_core::Error) -> ApiError {
    match e {
        text2seg_core::Error::Backend { stage, source } => {
            let code = source.code();
            let message = match source {
                BackendError::Service { message, .. } => message,
                other => other.to_string(),
            };
            ApiError(BackendError::Service {
                code,
                message: format!("{stage}: {message}"),
            })
        }
        other => bad_request(other.to_string()),
    }
}

pub fn strategy_descriptors(backend: &dyn Backend) -> Vec<StrategyDescriptor> {
    let caps = backend.capabilities();
    StrategyId::ALL
        .into_iter()
        .map(|id| StrategyDescriptor {
            id,
            name: id.name().into(),
            display: id.display().into(),
            description: id.description().into(),
            requires: id.required_capabilities().to_vec(),
            available: id.required_capabilities().iter().all(|c| caps.contains(c)),
        })
        .collect()
}

/// Runs a segment request to completion. Shared by the HTTP handler and tests.
pub fn handle_segment(
    state: &ServiceState,
    req: SegmentApiRequest,
) -> std::result::Result<SegmentApiResponse, ApiError> {
    let strategy: StrategyId = req
        .strategy
        .parse()
        .map_err(|e: text2seg_core::Error| bad_request(e.to_string()))?;
    let params = req.params.unwrap_or_else(|| state.params.clone());
    let manifest = &state.manifest;
    let known = manifest.class_by_label(&req.label);
    let id = known.map_or(manifest.classes.len() as u32, |c| c.id);
    let spec = ClassSpec::new(id, req.label.trim()).with_synonyms(req.synonyms);
    spec.validate().map_err(core_error)?;

    let (item, image, gt) = match (&req.item, &req.image_png_b64) {
        (Some(item_id), None) => {
            let item = manifest
                .item(item_id)
                .ok_or_else(|| bad_request(format!("unknown item {item_id:?}")))?;
            let image = manifest
                .load_image(item)
                .map_err(|e| ApiError(BackendError::model(e.to_string())))?;
            let gt = manifest
                .load_gt(item)
                .map_err(|e| ApiError(BackendError::model(e.to_string())))?;
            (Some(item_id.clone()), image, gt)
        }
        (None, Some(b64)) => (None, wire::decode_image(b64)?, None),
        _ => return Err(bad_request("exactly one of item and image_png_b64 is required")),
    };

    let seg = segment_image(
        state.backend.as_ref(),
        &image,
        manifest.tile_size,
        &spec,
        strategy,
        &params,
    )
    .map_err(core_error)?;

    let metrics = match (gt, known) {
        (Some(gt), Some(class)) => {
            let decoded = decode_gt(&gt, manifest).map_err(|e| ApiError(BackendError::model(e.to_string())))?;
            let counts = confusion_counts(&seg.mask, &decoded.classes[class.id as usize], Some(&decoded.ignore))
                .map_err(core_error)?;
            Some(ClassReport::from_counts(class.id, &class.label, counts).map_err(core_error)?)
        }
        _ => None,
    };

    Ok(SegmentApiResponse {
        item,
        class: spec,
        strategy,
        mask: seg.mask,
        grid: seg.grid,
        traces: seg.traces,
        metrics,
    })
}

async fn strategies(State(state): State<ServiceState>) -> Json<Vec<StrategyDescriptor>> {
    Json(strategy_descriptors(state.backend.as_ref()))
}

async fn manifest(State(state): State<ServiceState>) -> Json<ManifestSummary> {
    let m = &state.manifest;
    Json(ManifestSummary {
        name: m.name.clone(),
        tile_size: m.tile_size,
        ignore_index: m.ignore_index,
        classes: m.classes.clone(),
        items: m
            .items
            .iter()
            .map(|i| ItemSummary {
                id: i.id(),
                has_gt: i.gt.is_some(),
            })
            .collect(),
        defaults: state.params.clone(),
        max_synonyms: text2seg_core::promptgen::MAX_SYNONYMS,
    })
}

async fn item_image(
    State(state): State<ServiceState>,
    Path(id): Path<String>,
) -> std::result::Result<impl IntoResponse, ApiError> {
    let item = state
        .manifest
        .item(&id)
        .ok_or_else(|| bad_request(format!("unknown item {id:?}")))?;
    let path = state.manifest.resolve(&item.image);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(BackendError::model(format!("{}: {e}", path.display()))))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes))
}

async fn segment(
    State(state): State<ServiceState>,
    body: Bytes,
) -> std::result::Result<Json<SegmentApiResponse>, ApiError> {
    let req: SegmentApiRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid request body: {e}")))?;
    tokio::task::spawn_blocking(move || handle_segment(&state, req))
        .await
        .map_err(|e| ApiError(BackendError::model(format!("worker panicked: {e}"))))?
        .map(Json)
}

pub fn service_router(state: ServiceState) -> Router {
    Router::new()
        .route("/api/strategies", get(strategies))
        .route("/api/manifest", get(manifest))
        .route("/api/items/{id}/image", get(item_image))
        .route("/api/segment", post(segment))
        .layer(DefaultBodyLimit::disable())
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub fn service_state(config: &RunConfig) -> Result<ServiceState> {
    let manifest = DatasetManifest::load(&config.manifest).map_err(|e| HarnessError::config(e.to_string()))?;
    let open = open_backend(&config.backend)?;
    Ok(ServiceState {
        manifest: Arc::new(manifest),
        backend: open.backend,
        params: config.params.clone(),
    })
}

/// Serves the workbench API until the process exits.
pub fn serve(config: &RunConfig, addr: SocketAddr) -> Result<()> {
    let state = service_state(config)?;
    serve_router(service_router(state), addr)
}

/// Runs `router` on a fresh multi-threaded runtime.
pub fn serve_router(router: Router, addr: SocketAddr) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(HarnessError::io("tokio runtime"))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| HarnessError::config(format!("cannot bind {addr}: {e}")))?;
        eprintln!(
            "listening on http://{}",
            listener.local_addr().map_err(HarnessError::io("local addr"))?
        );
        axum::serve(listener, router).await.map_err(HarnessError::io("server"))
    })
}
