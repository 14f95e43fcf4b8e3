//! JSON bodies of the HTTP inference protocol.
//!
//! All endpoints are `POST` with UTF-8 JSON bodies. Images travel as
//! base64-encoded PNG, masks as RLE objects, and similarity maps as base64
//! little-endian `f32` arrays. Failures are non-200 responses carrying
//! [`ErrorBody`].

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BackendError, Capability, ErrorCode};
use crate::raster::{BBox, BinaryMask, ImageRaster, InstanceMask, PointPrompt, SimilarityMap};

pub const DETECT: &str = "/v1/detect";
pub const SIMILARITY: &str = "/v1/similarity";
pub const SEGMENT: &str = "/v1/segment";
pub const SEGMENT_AUTO: &str = "/v1/segment_auto";
pub const EMBED_IMAGE: &str = "/v1/embed_image";
pub const EMBED_TEXT: &str = "/v1/embed_text";
pub const INFO: &str = "/v1/info";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image_png_b64: String,
    pub phrases: Vec<String>,
    pub box_threshold: f64,
    pub text_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRequest {
    pub image_png_b64: String,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResponse {
    pub w: u32,
    pub h: u32,
    pub values_f32_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub image_png_b64: String,
    #[serde(default)]
    pub points: Vec<PointPrompt>,
    #[serde(default)]
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAutoRequest {
    pub image_png_b64: String,
    pub grid_n: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireInstance {
    pub rle: BinaryMask,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub instances: Vec<WireInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageRequest {
    pub image_png_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageResponse {
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextRequest {
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub capabilities: Vec<Capability>,
    #[serde(default)]
    pub model_ids: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl ErrorBody {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            error: ErrorDetail {
                code,
                message: message.into(),
            },
        }
    }
}

impl From<&BackendError> for ErrorBody {
    fn from(e: &BackendError) -> Self {
        match e {
            BackendError::Service { code, message } => ErrorBody::new(*code, message.clone()),
            other => ErrorBody::new(other.code(), other.to_string()),
        }
    }
}

impl From<ErrorBody> for BackendError {
    fn from(body: ErrorBody) -> Self {
        BackendError::Service {
            code: body.error.code,
            message: body.error.message,
        }
    }
}

/// HTTP status used for each error code.
pub fn status_for(code: ErrorCode) -> u16 {
    match code {
        ErrorCode::BadRequest => 400,
        ErrorCode::ModelError => 500,
        ErrorCode::Unsupported => 501,
    }
}

pub fn encode_image(image: &ImageRaster) -> Result<String, BackendError> {
    let png = image
        .to_png()
        .map_err(|e| BackendError::bad_request(format!("PNG encoding failed: {e}")))?;
    Ok(STANDARD.encode(png))
}

pub fn decode_image(b64: &str) -> Result<ImageRaster, BackendError> {
    let bytes = STANDARD
        .decode(b64)
        .map_err(|e| BackendError::bad_request(format!("image_png_b64 is not base64: {e}")))?;
    ImageRaster::from_png(&bytes).map_err(|e| BackendError::bad_request(format!("image_png_b64: {e}")))
}

pub fn encode_f32s(values: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_f32s(b64: &str) -> Result<Vec<f32>, String> {
    let bytes = STANDARD.decode(b64).map_err(|e| e.to_string())?;
    if bytes.len() % 4 != 0 {
        return Err(format!("{} bytes is not a whole number of f32 values", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

impl From<&SimilarityMap> for SimilarityResponse {
    fn from(map: &SimilarityMap) -> Self {
        Self {
            w: map.width(),
            h: map.height(),
            values_f32_b64: encode_f32s(map.values()),
        }
    }
}

impl SimilarityResponse {
    pub fn to_map(&self) -> Result<SimilarityMap, String> {
        let values = decode_f32s(&self.values_f32_b64)?;
        SimilarityMap::new(self.w, self.h, values).map_err(|e| e.to_string())
    }
}

impl From<InstanceMask> for WireInstance {
    fn from(i: InstanceMask) -> Self {
        Self {
            rle: i.mask,
            confidence: i.confidence,
        }
    }
}

impl From<WireInstance> for InstanceMask {
    fn from(i: WireInstance) -> Self {
        Self {
            mask: i.rle,
            confidence: i.confidence,
        }
    }
}
