//! The model-inference contract.
//!
//! The engine never runs models itself. Detection, similarity maps,
//! promptable segmentation and embeddings all cross the [`Backend`] trait,
//! implemented here by the scene-driven [`MockBackend`] and elsewhere by a
//! remote client speaking the JSON wire protocol in [`wire`].

mod mock;
pub mod wire;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{mask_iou, BBox, ImageRaster, InstanceMask, PointPrompt, SimilarityMap};

pub use mock::{
    default_shape_color, generate_scene, Geometry, MockBackend, MockScene, MockShape, SceneGenConfig, SceneLabel,
};

/// Error codes shared with the wire protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    ModelError,
    Unsupported,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::ModelError => "model_error",
            ErrorCode::Unsupported => "unsupported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("{code}: {message}")]
    Service { code: ErrorCode, message: String },

    #[error("{endpoint}: transport failure: {message}")]
    Transport { endpoint: String, message: String },

    #[error("{endpoint}: protocol violation: {message}")]
    Protocol { endpoint: String, message: String },
}

impl BackendError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::Service {
            code: ErrorCode::BadRequest,
            message: message.into(),
        }
    }

    pub fn model(message: impl Into<String>) -> Self {
        Self::Service {
            code: ErrorCode::ModelError,
            message: message.into(),
        }
    }

    pub fn unsupported(message: impl Into<String>) -> Self {
        Self::Service {
            code: ErrorCode::Unsupported,
            message: message.into(),
        }
    }

    /// The wire code reported for this error. Transport and protocol failures
    /// surface as `model_error` when relayed.
    pub fn code(&self) -> ErrorCode {
        match self {
            BackendError::Service { code, .. } => *code,
            _ => ErrorCode::ModelError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Detect,
    Similarity,
    SegmentPrompts,
    SegmentAuto,
    EmbedImage,
    EmbedText,
}

impl Capability {
    pub const ALL: [Capability; 6] = [
        Capability::Detect,
        Capability::Similarity,
        Capability::SegmentPrompts,
        Capability::SegmentAuto,
        Capability::EmbedImage,
        Capability::EmbedText,
    ];
}

pub type Capabilities = BTreeSet<Capability>;

/// A unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// L2-normalizes `raw`. Zero or non-finite vectors are rejected.
    pub fn normalized(raw: Vec<f32>) -> Result<Self, BackendError> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::model("embedding contains non-finite values"));
        }
        let norm = raw.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(BackendError::model("zero-norm embedding"));
        }
        Ok(Self(raw.into_iter().map(|v| (v as f64 / norm) as f32).collect()))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a as f64 * b as f64).sum()
    }
}

/// Inference capabilities behind which the foundation models live.
///
/// Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn detect_boxes(
        &self,
        image: &ImageRaster,
        phrases: &[String],
        box_threshold: f64,
        text_threshold: f64,
    ) -> Result<Vec<BBox>, BackendError>;

    fn similarity_map(&self, image: &ImageRaster, phrase: &str) -> Result<SimilarityMap, BackendError>;

    fn segment_prompts(
        &self,
        image: &ImageRaster,
        points: &[PointPrompt],
        boxes: &[BBox],
    ) -> Result<Vec<InstanceMask>, BackendError>;

    fn segment_auto(&self, image: &ImageRaster, grid_n: u32) -> Result<Vec<InstanceMask>, BackendError>;

    fn embed_image(&self, image: &ImageRaster) -> Result<Embedding, BackendError>;

    fn embed_texts(&self, phrases: &[String]) -> Result<Vec<Embedding>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn detect_boxes(
        &self,
        image: &ImageRaster,
        phrases: &[String],
        box_threshold: f64,
        text_threshold: f64,
    ) -> Result<Vec<BBox>, BackendError> {
        (**self).detect_boxes(image, phrases, box_threshold, text_threshold)
    }

    fn similarity_map(&self, image: &ImageRaster, phrase: &str) -> Result<SimilarityMap, BackendError> {
        (**self).similarity_map(image, phrase)
    }

    fn segment_prompts(
        &self,
        image: &ImageRaster,
        points: &[PointPrompt],
        boxes: &[BBox],
    ) -> Result<Vec<InstanceMask>, BackendError> {
        (**self).segment_prompts(image, points, boxes)
    }

    fn segment_auto(&self, image: &ImageRaster, grid_n: u32) -> Result<Vec<InstanceMask>, BackendError> {
        (**self).segment_auto(image, grid_n)
    }

    fn embed_image(&self, image: &ImageRaster) -> Result<Embedding, BackendError> {
        (**self).embed_image(image)
    }

    fn embed_texts(&self, phrases: &[String]) -> Result<Vec<Embedding>, BackendError> {
        (**self).embed_texts(phrases)
    }
}

pub const GALLERY_DEDUP_IOU: f64 = 0.9;

/// Greedy duplicate suppression over an automatic gallery: an instance is
/// dropped when a higher-confidence survivor overlaps it with IoU above
/// `threshold`. Survivors keep their input order.
pub fn dedup_instances(instances: Vec<InstanceMask>, threshold: f64) -> Vec<InstanceMask> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| instances[b].confidence.total_cmp(&instances[a].confidence));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let duplicate = kept
            .iter()
            .any(|&k| mask_iou(&instances[k].mask, &instances[i].mask).is_ok_and(|v| v > threshold));
        if !duplicate {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let mut slots: Vec<Option<InstanceMask>> = instances.into_iter().map(Some).collect();
    kept.into_iter().filter_map(|i| slots[i].take()).collect()
}
