//! Turning class text into visual prompts.
//!
//! Every phrase of a [`ClassSpec`] is sent to the backend separately; the
//! resulting boxes or points are merged in phrase order so the outcome does not
//! depend on how the calls were scheduled.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::raster::{normalize_similarity_map, BBox, ImageRaster, PointPrompt, SimilarityMap};

pub const MAX_SYNONYMS: usize = 10;
pub const BOX_DEDUP_IOU: f64 = 0.9;

/// Boxes and points handed to a promptable segmenter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisualPrompt {
    pub boxes: Vec<BBox>,
    pub points: Vec<PointPrompt>,
}

impl VisualPrompt {
    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty() && self.points.is_empty()
    }
}

/// A target class: its label and optional augmentation phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub id: u32,
    pub label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl ClassSpec {
    pub fn new(id: u32, label: impl Into<String>) -> Self {
        Self {
            id,
            label: label.into(),
            synonyms: Vec::new(),
        }
    }

    pub fn with_synonyms<I, S>(mut self, synonyms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.synonyms = synonyms.into_iter().map(Into::into).collect();
        self
    }

    /// The same class with augmentation switched off.
    pub fn plain(&self) -> Self {
        Self::new(self.id, self.label.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.trim().is_empty() {
            return Err(Error::InvalidArgument(format!("class {} has an empty label", self.id)));
        }
        if self.synonyms.len() > MAX_SYNONYMS {
            return Err(Error::InvalidArgument(format!(
                "class {:?} has {} synonyms, at most {MAX_SYNONYMS} allowed",
                self.label,
                self.synonyms.len()
            )));
        }
        if self.synonyms.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "class {:?} has an empty synonym",
                self.label
            )));
        }
        Ok(())
    }

    /// Phrases sent to the backend: the synonyms in their given order, with the
    /// label prepended when the list does not already contain it. Without
    /// synonyms this is just the label.
    pub fn phrases(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let label = self.label.trim();
        let has_label = self.synonyms.iter().any(|s| s.trim().eq_ignore_ascii_case(label));
        let head = (!has_label).then(|| label.to_string());
        head.into_iter()
            .chain(self.synonyms.iter().map(|s| s.trim().to_string()))
            .filter(|p| seen.insert(p.to_lowercase()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointSamplingConfig {
    /// Minimum normalized similarity of a sampled pixel.
    pub threshold: f32,
    /// Number of points kept per phrase.
    pub max_points: usize,
}

impl Default for PointSamplingConfig {
    fn default() -> Self {
        Self {
            threshold: 0.8,
            max_points: 5,
        }
    }
}

impl PointSamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "point threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if self.max_points == 0 {
            return Err(Error::InvalidArgument("max_points must be at least 1".into()));
        }
        Ok(())
    }
}

/// All knobs of prompt generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptParams {
    pub box_threshold: f64,
    pub text_threshold: f64,
    pub points: PointSamplingConfig,
    pub grid_n: u32,
}

impl Default for PromptParams {
    fn default() -> Self {
        Self {
            box_threshold: 0.35,
            text_threshold: 0.25,
            points: PointSamplingConfig::default(),
            grid_n: 32,
        }
    }
}

impl PromptParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("box_threshold", self.box_threshold)?;
        check_unit("text_threshold", self.text_threshold)?;
        self.points.validate()?;
        if self.grid_n == 0 {
            return Err(Error::InvalidArgument("grid_n must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("{name} {v} outside [0, 1]")));
    }
    Ok(())
}

/// Detector boxes for every phrase of `spec`, thresholded and merged.
///
/// Boxes scoring below `box_threshold` are dropped. Among boxes overlapping
/// with IoU above [`BOX_DEDUP_IOU`] the higher score survives, the earlier
/// phrase on ties. The result is ordered by descending score.
pub fn generate_box_prompts(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    box_threshold: f64,
    text_threshold: f64,
) -> Result<Vec<BBox>> {
    spec.validate()?;
    check_unit("box_threshold", box_threshold)?;
    check_unit("text_threshold", text_threshold)?;
    let mut candidates = Vec::new();
    for phrase in spec.phrases() {
        let boxes = backend
            .detect_boxes(image, std::slice::from_ref(&phrase), box_threshold, text_threshold)
            .map_err(Error::backend(format!("detect {phrase:?}")))?;
        candidates.extend(boxes.into_iter().filter(|b| b.score >= box_threshold));
    }
    Ok(suppress_duplicate_boxes(candidates, BOX_DEDUP_IOU))
}

fn suppress_duplicate_boxes(mut boxes: Vec<BBox>, threshold: f64) -> Vec<BBox> {
    // stable: equal scores keep phrase order
    boxes.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<BBox> = Vec::with_capacity(boxes.len());
    for b in boxes {
        if kept.iter().all(|k| k.iou(&b) <= threshold) {
            kept.push(b);
        }
    }
    kept
}

/// Top-`max_points` pixels at or above the threshold, strongest first, ties in
/// row-major order. `map` is expected to be normalized.
pub fn sample_point_prompts(map: &SimilarityMap, cfg: &PointSamplingConfig) -> Vec<PointPrompt> {
    let w = map.width() as usize;
    let mut hits: Vec<(usize, f32)> = map
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= cfg.threshold)
        .map(|(i, &v)| (i, v))
        .collect();
    hits.sort_by(|a, b| b.1.total_cmp(&a.1));
    hits.into_iter()
        .take(cfg.max_points)
        .map(|(i, _)| PointPrompt::foreground((i % w) as u32, (i / w) as u32))
        .collect()
}

/// Points sampled per phrase, plus the normalized maps they came from.
#[derive(Debug, Clone)]
pub struct SampledPoints {
    pub points: Vec<PointPrompt>,
    pub maps: Vec<(String, SimilarityMap)>,
}

pub fn sample_similarity_points(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    cfg: &PointSamplingConfig,
) -> Result<SampledPoints> {
    spec.validate()?;
    cfg.validate()?;
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    let mut maps = Vec::new();
    for phrase in spec.phrases() {
        let raw = backend
            .similarity_map(image, &phrase)
            .map_err(Error::backend(format!("similarity {phrase:?}")))?;
        if raw.width() != image.width() || raw.height() != image.height() {
            return Err(Error::DimensionMismatch {
                expected: image.dims(),
                found: (raw.width(), raw.height()),
            });
        }
        let map = normalize_similarity_map(&raw)?;
        for p in sample_point_prompts(&map, cfg) {
            if seen.insert((p.x, p.y)) {
                points.push(p);
            }
        }
        maps.push((phrase, map));
    }
    Ok(SampledPoints { points, maps })
}

/// Union of the points sampled for each phrase, deduplicated by coordinate.
pub fn merged_similarity_points(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    cfg: &PointSamplingConfig,
) -> Result<Vec<PointPrompt>> {
    Ok(sample_similarity_points(backend, image, spec, cfg)?.points)
}

/// Centers of an `n × n` grid of equal cells, row-major.
pub fn grid_points(width: u32, height: u32, n_per_side: u32) -> Result<Vec<PointPrompt>> {
    if n_per_side == 0 {
        return Err(Error::InvalidArgument("n_per_side must be at least 1".into()));
    }
    let n = n_per_side as u64;
    let center = |i: u64, extent: u32| ((2 * i + 1) * extent as u64 / (2 * n)) as u32;
    Ok((0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| PointPrompt::foreground(center(i, width), center(j, height)))
        .collect())
}
