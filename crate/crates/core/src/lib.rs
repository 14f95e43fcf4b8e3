//! Text-conditioned zero-shot semantic segmentation.
//!
//! A class label and its synonyms are turned into box and point prompts, fed
//! to a promptable segmenter behind the [`backend::Backend`] trait, optionally
//! filtered by image/text embedding similarity, and scored against ground
//! truth with per-class IoU and overall accuracy.

pub mod backend;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod promptgen;
pub mod raster;
pub mod strategies;

pub use backend::{Backend, BackendError, Capability, Embedding, ErrorCode, MockBackend, MockScene, MockShape};
pub use dataset::{decode_gt, stitch, tile_image, tile_mask, DatasetManifest, DecodedGt, GroundTruth, TileGrid};
pub use error::{Error, Result};
pub use metrics::{
    aggregate, best_over_classes, confusion_counts, iou, oa, ClassReport, ConfusionCounts, DatasetReport,
};
pub use promptgen::{ClassSpec, PointSamplingConfig, PromptParams, VisualPrompt};
pub use raster::{
    mask_iou, mask_union, rle_decode, rle_encode, BBox, BinaryMask, ImageRaster, InstanceMask, PointPrompt, Polarity,
    RleMask, SimilarityMap,
};
pub use strategies::{run_baseline, run_strategy, FilterConfig, StrategyId, StrategyParams, StrategyTrace};
