use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use text2seg_core::backend::wire::{self, *};
use text2seg_core::{Backend, BackendError};

#[derive(Clone)]
struct AppState {
    backend: Arc<dyn Backend>,
    model_ids: Arc<BTreeMap<String, String>>,
}

/// Wire-protocol error rendered with its mapped HTTP status.
#[derive(Debug)]
pub struct ApiError(pub BackendError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody::from(&self.0);
        let status = StatusCode::from_u16(status_for(body.error.code)).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(body)).into_response()
    }
}

impl From<BackendError> for ApiError {
    fn from(e: BackendError) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(BackendError::bad_request(format!("invalid request body: {e}"))))
}

/// Runs a blocking backend call off the async executor.
async fn blocking<T, F>(state: AppState, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&dyn Backend) -> Result<T, BackendError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(state.backend.as_ref()))
        .await
        .map_err(|e| ApiError(BackendError::model(format!("worker panicked: {e}"))))?
        .map(Json)
        .map_err(ApiError)
}

/// Protocol router serving `backend` under the `/v1` endpoints.
pub fn router(backend: Arc<dyn Backend>, model_ids: BTreeMap<String, String>) -> Router {
    let state = AppState {
        backend,
        model_ids: Arc::new(model_ids),
    };
    Router::new()
        .route(wire::INFO, get(info))
        .route(wire::DETECT, post(detect))
        .route(wire::SIMILARITY, post(similarity))
        .route(wire::SEGMENT, post(segment))
        .route(wire::SEGMENT_AUTO, post(segment_auto))
        .route(wire::EMBED_IMAGE, post(embed_image))
        .route(wire::EMBED_TEXT, post(embed_text))
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

async fn info(State(state): State<AppState>) -> Json<InfoResponse> {
    Json(InfoResponse {
        capabilities: state.backend.capabilities().into_iter().collect(),
        model_ids: (*state.model_ids).clone(),
    })
}

async fn detect(State(state): State<AppState>, body: Bytes) -> ApiResult<DetectResponse> {
    let req: DetectRequest = parse(&body)?;
    blocking(state, move |b| {
        let image = decode_image(&req.image_png_b64)?;
        let boxes = b.detect_boxes(&image, &req.phrases, req.box_threshold, req.text_threshold)?;
        Ok(DetectResponse { boxes })
    })
    .await
}

async fn similarity(State(state): State<AppState>, body: Bytes) -> ApiResult<SimilarityResponse> {
    let req: SimilarityRequest = parse(&body)?;
    blocking(state, move |b| {
        let image = decode_image(&req.image_png_b64)?;
        let map = b.similarity_map(&image, &req.phrase)?;
        Ok(SimilarityResponse::from(&map))
    })
    .await
}

async fn segment(State(state): State<AppState>, body: Bytes) -> ApiResult<SegmentResponse> {
    let req: SegmentRequest = parse(&body)?;
    if req.points.is_empty() && req.boxes.is_empty() {
        return Err(ApiError(BackendError::bad_request("segment needs at least one prompt")));
    }
    blocking(state, move |b| {
        let image = decode_image(&req.image_png_b64)?;
        let instances = b.segment_prompts(&image, &req.points, &req.boxes)?;
        Ok(SegmentResponse {
            instances: instances.into_iter().map(WireInstance::from).collect(),
        })
    })
    .await
}

async fn segment_auto(State(state): State<AppState>, body: Bytes) -> ApiResult<SegmentResponse> {
    let req: SegmentAutoRequest = parse(&body)?;
    if req.grid_n == 0 {
        return Err(ApiError(BackendError::bad_request("grid_n must be positive")));
    }
    blocking(state, move |b| {
        let image = decode_image(&req.image_png_b64)?;
        let instances = b.segment_auto(&image, req.grid_n)?;
        Ok(SegmentResponse {
            instances: instances.into_iter().map(WireInstance::from).collect(),
        })
    })
    .await
}

async fn embed_image(State(state): State<AppState>, body: Bytes) -> ApiResult<EmbedImageResponse> {
    let req: EmbedImageRequest = parse(&body)?;
    blocking(state, move |b| {
        let image = decode_image(&req.image_png_b64)?;
        let e = b.embed_image(&image)?;
        Ok(EmbedImageResponse {
            vector: e.as_slice().to_vec(),
        })
    })
    .await
}

async fn embed_text(State(state): State<AppState>, body: Bytes) -> ApiResult<EmbedTextResponse> {
    let req: EmbedTextRequest = parse(&body)?;
    blocking(state, move |b| {
        let vectors = b.embed_texts(&req.phrases)?;
        Ok(EmbedTextResponse {
            vectors: vectors.into_iter().map(|e| e.as_slice().to_vec()).collect(),
        })
    })
    .await
}

/// Serves the protocol on `listener` until the process exits.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
