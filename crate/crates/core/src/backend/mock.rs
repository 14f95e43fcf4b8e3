//! Deterministic backend driven by synthetic scenes.
//!
//! A [`MockScene`] is a set of labeled rectangles and circles. Rendering paints
//! each shape in its own unique color, largest first, so the visible owner of a
//! pixel is the smallest shape containing it (earlier shape on equal area).
//! The backend answers every request by reading shape identity back out of the
//! pixel colors it is given, which makes it a pure function of
//! (scenes, request) and lets it work on any crop or tile of a rendered scene.
//!
//! Black is reserved for "no shape"; crops, padding and unknown colors carry
//! no ownership.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Capabilities, Capability, Embedding};
use crate::error::{Error, Result};
use crate::raster::{BBox, BinaryMask, ImageRaster, InstanceMask, PointPrompt, Polarity, SimilarityMap};

/// Extra embedding dimensions for phrases that match no scene label.
const HASHED_DIMS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Half-open `[x0, x1) × [y0, y1)`.
    Rect { x0: u32, y0: u32, x1: u32, y1: u32 },
    /// Pixel `(x, y)` is inside when its center lies within `r` of `(cx, cy)`.
    Circle { cx: f64, cy: f64, r: f64 },
}

impl Geometry {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        match *self {
            Geometry::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Geometry::Circle { cx, cy, r } => {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                dx * dx + dy * dy <= r * r
            }
        }
    }

    /// Pixel rectangle that can contain set pixels, clipped to the frame.
    fn pixel_bounds(&self, w: u32, h: u32) -> (u32, u32, u32, u32) {
        match *self {
            Geometry::Rect { x0, y0, x1, y1 } => (x0.min(w), y0.min(h), x1.min(w), y1.min(h)),
            Geometry::Circle { cx, cy, r } => {
                let lo = |c: f64| (c - r - 0.5).floor().max(0.0) as u32;
                let hi = |c: f64, lim: u32| ((c + r + 0.5).ceil().max(0.0) as u32).min(lim);
                (lo(cx), lo(cy), hi(cx, w), hi(cy, h))
            }
        }
    }

    fn area(&self, w: u32, h: u32) -> u64 {
        let (x0, y0, x1, y1) = self.pixel_bounds(w, h);
        match self {
            Geometry::Rect { .. } => (x1 - x0) as u64 * (y1 - y0) as u64,
            Geometry::Circle { .. } => (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                .filter(|&(x, y)| self.contains(x, y))
                .count() as u64,
        }
    }

    fn in_bounds(&self, w: u32, h: u32) -> bool {
        match *self {
            Geometry::Rect { x0, y0, x1, y1 } => x0 < x1 && y0 < y1 && x1 <= w && y1 <= h,
            Geometry::Circle { cx, cy, r } => {
                r > 0.0 && cx - r >= 0.0 && cy - r >= 0.0 && cx + r <= w as f64 && cy + r <= h as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShape", into = "RawShape")]
pub struct MockShape {
    pub geometry: Geometry,
    pub label: String,
    /// Response of this shape to each phrase. Empty means `{label: 1.0}`.
    pub scores: BTreeMap<String, f64>,
    /// Render color; defaults to [`default_shape_color`] of the shape index.
    pub color: Option<[u8; 3]>,
}

#[derive(Serialize, Deserialize)]
struct RawShape {
    kind: String,
    geom: Vec<f64>,
    label: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<[u8; 3]>,
}

impl TryFrom<RawShape> for MockShape {
    type Error = String;

    fn try_from(raw: RawShape) -> std::result::Result<Self, String> {
        let geometry = match (raw.kind.as_str(), raw.geom.as_slice()) {
            ("rect", &[x0, y0, x1, y1]) => {
                let px = |v: f64| -> std::result::Result<u32, String> {
                    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                        Ok(v as u32)
                    } else {
                        Err(format!("rect coordinate {v} is not a pixel index"))
                    }
                };
                Geometry::Rect {
                    x0: px(x0)?,
                    y0: px(y0)?,
                    x1: px(x1)?,
                    y1: px(y1)?,
                }
            }
            ("circle", &[cx, cy, r]) => Geometry::Circle { cx, cy, r },
            (kind, geom) => {
                return Err(format!(
                    "unsupported shape kind {kind:?} with {} geometry values",
                    geom.len()
                ))
            }
        };
        Ok(MockShape {
            geometry,
            label: raw.label,
            scores: raw.scores,
            color: raw.color,
        })
    }
}

impl From<MockShape> for RawShape {
    fn from(shape: MockShape) -> Self {
        let (kind, geom) = match shape.geometry {
            Geometry::Rect { x0, y0, x1, y1 } => ("rect", vec![x0 as f64, y0 as f64, x1 as f64, y1 as f64]),
            Geometry::Circle { cx, cy, r } => ("circle", vec![cx, cy, r]),
        };
        RawShape {
            kind: kind.into(),
            geom,
            label: shape.label,
            scores: shape.scores,
            color: shape.color,
        }
    }
}

impl MockShape {
    pub fn rect(x0: u32, y0: u32, x1: u32, y1: u32, label: impl Into<String>) -> Self {
        Self {
            geometry: Geometry::Rect { x0, y0, x1, y1 },
            label: label.into(),
            scores: BTreeMap::new(),
            color: None,
        }
    }

    pub fn circle(cx: f64, cy: f64, r: f64, label: impl Into<String>) -> Self {
        Self {
            geometry: Geometry::Circle { cx, cy, r },
            label: label.into(),
            scores: BTreeMap::new(),
            color: None,
        }
    }

    pub fn with_scores<I, S>(mut self, scores: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        self.scores = scores.into_iter().map(|(k, v)| (k.into(), v)).collect();
        self
    }

    pub fn with_color(mut self, color: [u8; 3]) -> Self {
        self.color = Some(color);
        self
    }

    /// Phrase responses keyed by normalized phrase.
    fn score_table(&self) -> HashMap<String, f64> {
        if self.scores.is_empty() {
            return HashMap::from([(normalize_phrase(&self.label), 1.0)]);
        }
        self.scores.iter().map(|(k, &v)| (normalize_phrase(k), v)).collect()
    }
}

/// Distinct non-black color for shape index `i` (bijective for `i < 2^24 - 1`).
pub fn default_shape_color(i: usize) -> [u8; 3] {
    let v = ((i as u32).wrapping_add(1)).wrapping_mul(0x9E_3779) & 0xFF_FFFF;
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

fn normalize_phrase(p: &str) -> String {
    p.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScene {
    pub w: u32,
    pub h: u32,
    pub shapes: Vec<MockShape>,
}

impl MockScene {
    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidArgument(format!(
                "scene has degenerate size {}x{}",
                self.w, self.h
            )));
        }
        let mut seen = HashMap::new();
        for (i, (shape, color)) in self.shapes.iter().zip(self.colors()).enumerate() {
            if shape.label.trim().is_empty() {
                return Err(Error::InvalidArgument(format!("shape {i} has an empty label")));
            }
            if !shape.geometry.in_bounds(self.w, self.h) {
                return Err(Error::InvalidArgument(format!("shape {i} is out of bounds")));
            }
            if shape.scores.values().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::InvalidArgument(format!("shape {i} has a score outside [0, 1]")));
            }
            if color == [0, 0, 0] {
                return Err(Error::InvalidArgument(format!(
                    "shape {i} uses the reserved color black"
                )));
            }
            if let Some(j) = seen.insert(color, i) {
                return Err(Error::InvalidArgument(format!(
                    "shapes {j} and {i} share color {color:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn colors(&self) -> Vec<[u8; 3]> {
        self.shapes
            .iter()
            .enumerate()
            .map(|(i, s)| s.color.unwrap_or_else(|| default_shape_color(i)))
            .collect()
    }

    /// Visible owner (shape index) of every pixel, row-major.
    pub fn owner_map(&self) -> Vec<Option<usize>> {
        let mut order: Vec<(u64, usize)> = self
            .shapes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.geometry.area(self.w, self.h), i))
            .collect();
        // Paint largest first; among equal areas the earlier shape lands on top.
        order.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
        let mut owner = vec![None; self.w as usize * self.h as usize];
        for (_, i) in order {
            let g = &self.shapes[i].geometry;
            let (x0, y0, x1, y1) = g.pixel_bounds(self.w, self.h);
            for y in y0..y1 {
                for x in x0..x1 {
                    if g.contains(x, y) {
                        owner[y as usize * self.w as usize + x as usize] = Some(i);
                    }
                }
            }
        }
        owner
    }

    pub fn render(&self) -> ImageRaster {
        let colors = self.colors();
        let mut pixels = Vec::with_capacity(self.w as usize * self.h as usize * 3);
        for owner in self.owner_map() {
            pixels.extend_from_slice(&owner.map_or([0, 0, 0], |i| colors[i]));
        }
        ImageRaster::new(self.w, self.h, pixels).expect("scene size validated")
    }

    /// Pixels visibly owned by shapes carrying `label` (case-insensitive).
    pub fn label_mask(&self, label: &str) -> BinaryMask {
        let label = normalize_phrase(label);
        let hit: Vec<bool> = self
            .shapes
            .iter()
            .map(|s| normalize_phrase(&s.label) == label)
            .collect();
        let bits = self
            .owner_map()
            .into_iter()
            .map(|o| o.is_some_and(|i| hit[i]))
            .collect();
        BinaryMask::from_bits(self.w, self.h, bits).expect("owner map covers the frame")
    }

    /// `true` when, inside some tile of the given size, two visible shapes
    /// have identical bounding boxes. Box prompts cannot tell such shapes apart.
    pub fn has_box_ambiguity(&self, tile_size: u32) -> bool {
        let owner = self.owner_map();
        let tile = tile_size.max(1);
        for ty in (0..self.h).step_by(tile as usize) {
            for tx in (0..self.w).step_by(tile as usize) {
                let mut boxes: BTreeMap<usize, (u32, u32, u32, u32)> = BTreeMap::new();
                for y in ty..ty.saturating_add(tile).min(self.h) {
                    for x in tx..tx.saturating_add(tile).min(self.w) {
                        if let Some(i) = owner[y as usize * self.w as usize + x as usize] {
                            let b = boxes.entry(i).or_insert((x, y, x + 1, y + 1));
                            *b = (b.0.min(x), b.1.min(y), b.2.max(x + 1), b.3.max(y + 1));
                        }
                    }
                }
                let mut all: Vec<_> = boxes.into_values().collect();
                let n = all.len();
                all.sort_unstable();
                all.dedup();
                if all.len() != n {
                    return true;
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct ShapeRef {
    scene: usize,
    shape: usize,
}

struct ShapeInfo {
    label_index: usize,
    scores: HashMap<String, f64>,
}

struct Visible {
    shape: ShapeRef,
    mask: BinaryMask,
}

/// Backend answering every capability from a set of [`MockScene`]s.
pub struct MockBackend {
    shapes: BTreeMap<ShapeRef, ShapeInfo>,
    by_color: HashMap<[u8; 3], ShapeRef>,
    labels: Vec<String>,
    phrase_label: HashMap<String, usize>,
}

impl MockBackend {
    pub fn new(scene: MockScene) -> Result<Self> {
        Self::from_scenes(vec![scene])
    }

    /// Shape colors must be unique across all scenes.
    pub fn from_scenes(scenes: Vec<MockScene>) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        for scene in &scenes {
            scene.validate()?;
            labels.extend(scene.shapes.iter().map(|s| normalize_phrase(&s.label)));
        }
        labels.sort();
        labels.dedup();
        let label_index = |l: &str| labels.binary_search(&normalize_phrase(l)).expect("collected above");

        let mut shapes = BTreeMap::new();
        let mut by_color = HashMap::new();
        // phrase -> (score, label) of its strongest response
        let mut best: HashMap<String, (f64, usize)> = HashMap::new();
        for (si, scene) in scenes.iter().enumerate() {
            for (i, (shape, color)) in scene.shapes.iter().zip(scene.colors()).enumerate() {
                let r = ShapeRef { scene: si, shape: i };
                if by_color.insert(color, r).is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "color {color:?} is used by more than one shape across scenes"
                    )));
                }
                let info = ShapeInfo {
                    label_index: label_index(&shape.label),
                    scores: shape.score_table(),
                };
                for (phrase, &score) in &info.scores {
                    if score <= 0.0 {
                        continue;
                    }
                    let entry = best.entry(phrase.clone()).or_insert((score, info.label_index));
                    if score > entry.0 || (score == entry.0 && info.label_index < entry.1) {
                        *entry = (score, info.label_index);
                    }
                }
                shapes.insert(r, info);
            }
        }
        let phrase_label = best.into_iter().map(|(p, (_, l))| (p, l)).collect();
        Ok(Self {
            shapes,
            by_color,
            labels,
            phrase_label,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.labels.len() + 1 + HASHED_DIMS
    }

    fn owners(&self, image: &ImageRaster) -> Vec<Option<ShapeRef>> {
        image
            .pixels()
            .chunks_exact(3)
            .map(|p| self.by_color.get(&[p[0], p[1], p[2]]).copied())
            .collect()
    }

    fn visible(&self, image: &ImageRaster) -> Vec<Visible> {
        let (w, h) = image.dims();
        let mut masks: BTreeMap<ShapeRef, BinaryMask> = BTreeMap::new();
        for (i, owner) in self.owners(image).into_iter().enumerate() {
            if let Some(r) = owner {
                let x = (i % w as usize) as u32;
                let y = (i / w as usize) as u32;
                masks
                    .entry(r)
                    .or_insert_with(|| BinaryMask::empty(w, h))
                    .set(x, y, true);
            }
        }
        masks.into_iter().map(|(shape, mask)| Visible { shape, mask }).collect()
    }

    fn score(&self, shape: ShapeRef, phrase: &str) -> f64 {
        self.shapes[&shape]
            .scores
            .get(&normalize_phrase(phrase))
            .copied()
            .unwrap_or(0.0)
    }

    fn void_dim(&self) -> usize {
        self.labels.len()
    }

    fn phrase_dim(&self, phrase: &str) -> usize {
        let p = normalize_phrase(phrase);
        match self.phrase_label.get(&p) {
            Some(&l) => l,
            None => self.labels.len() + 1 + (fnv1a(p.as_bytes()) % HASHED_DIMS as u64) as usize,
        }
    }

    fn one_hot(&self, dim: usize) -> Embedding {
        let mut v = vec![0.0; self.embedding_dim()];
        v[dim] = 1.0;
        Embedding::normalized(v).expect("one-hot is unit norm")
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn mask_box(mask: &BinaryMask, score: f64, phrase: &str) -> Option<BBox> {
    let (x0, y0, x1, y1) = mask.bounds()?;
    Some(BBox {
        x0,
        y0,
        x1,
        y1,
        score,
        phrase: phrase.to_string(),
    })
}

impl Backend for MockBackend {
    fn capabilities(&self) -> Capabilities {
        Capability::ALL.into_iter().collect()
    }

    fn detect_boxes(
        &self,
        image: &ImageRaster,
        phrases: &[String],
        _box_threshold: f64,
        text_threshold: f64,
    ) -> Result<Vec<BBox>, BackendError> {
        if phrases.is_empty() {
            return Err(BackendError::bad_request("detect needs at least one phrase"));
        }
        let visible = self.visible(image);
        let mut boxes = Vec::new();
        for phrase in phrases {
            for v in &visible {
                let score = self.score(v.shape, phrase);
                if score > 0.0 && score >= text_threshold {
                    boxes.extend(mask_box(&v.mask, score, phrase));
                }
            }
        }
        Ok(boxes)
    }

    fn similarity_map(&self, image: &ImageRaster, phrase: &str) -> Result<SimilarityMap, BackendError> {
        let values = self
            .owners(image)
            .into_iter()
            .map(|o| o.map_or(0.0, |r| self.score(r, phrase) as f32))
            .collect();
        SimilarityMap::new(image.width(), image.height(), values).map_err(|e| BackendError::model(e.to_string()))
    }

    fn segment_prompts(
        &self,
        image: &ImageRaster,
        points: &[PointPrompt],
        boxes: &[BBox],
    ) -> Result<Vec<InstanceMask>, BackendError> {
        if points.is_empty() && boxes.is_empty() {
            return Err(BackendError::bad_request("segment needs at least one prompt"));
        }
        let (w, h) = image.dims();
        if points.iter().any(|p| p.x >= w || p.y >= h) {
            return Err(BackendError::bad_request("point prompt out of bounds"));
        }
        if boxes
            .iter()
            .any(|b| !(b.x0 < b.x1 && b.y0 < b.y1 && b.x1 <= w && b.y1 <= h))
        {
            return Err(BackendError::bad_request("box prompt out of bounds"));
        }
        let visible = self.visible(image);
        let owners = self.owners(image);
        let mut out = Vec::new();
        for p in points.iter().filter(|p| p.polarity == Polarity::Foreground) {
            let Some(r) = owners[p.y as usize * w as usize + p.x as usize] else {
                continue;
            };
            let v = visible.iter().find(|v| v.shape == r).expect("owner is visible");
            out.push(InstanceMask {
                mask: v.mask.clone(),
                confidence: 1.0,
            });
        }
        for b in boxes {
            let mut best: Option<(f64, &Visible)> = None;
            for v in &visible {
                let vb = mask_box(&v.mask, 1.0, "").expect("visible masks are nonempty");
                let iou = b.iou(&vb);
                if iou > 0.0 && best.is_none_or(|(s, _)| iou > s) {
                    best = Some((iou, v));
                }
            }
            if let Some((_, v)) = best {
                out.push(InstanceMask {
                    mask: v.mask.clone(),
                    confidence: 1.0,
                });
            }
        }
        Ok(out)
    }

    fn segment_auto(&self, image: &ImageRaster, grid_n: u32) -> Result<Vec<InstanceMask>, BackendError> {
        if grid_n == 0 {
            return Err(BackendError::bad_request("grid_n must be positive"));
        }
        Ok(self
            .visible(image)
            .into_iter()
            .map(|v| InstanceMask {
                mask: v.mask,
                confidence: 1.0,
            })
            .collect())
    }

    fn embed_image(&self, image: &ImageRaster) -> Result<Embedding, BackendError> {
        let mut hist = vec![0.0f32; self.embedding_dim()];
        let mut any = false;
        for p in image.pixels().chunks_exact(3) {
            let rgb = [p[0], p[1], p[2]];
            if rgb == [0, 0, 0] {
                continue;
            }
            any = true;
            let dim = self
                .by_color
                .get(&rgb)
                .map_or(self.void_dim(), |r| self.shapes[r].label_index);
            hist[dim] += 1.0;
        }
        if !any {
            return Ok(self.one_hot(self.void_dim()));
        }
        Embedding::normalized(hist)
    }

    fn embed_texts(&self, phrases: &[String]) -> Result<Vec<Embedding>, BackendError> {
        Ok(phrases.iter().map(|p| self.one_hot(self.phrase_dim(p))).collect())
    }
}

/// A label the scene generator may place, with the phrases it responds to.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLabel {
    pub label: String,
    /// Phrase responses; empty means the shape answers only to its label.
    pub scores: Vec<(String, f64)>,
}

impl SceneLabel {
    pub fn plain(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            scores: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneGenConfig {
    pub min_size: u32,
    pub max_size: u32,
    /// Label of the full-frame shape every other shape sits on; `None` leaves
    /// the background black.
    pub ground: Option<SceneLabel>,
    pub objects: Vec<SceneLabel>,
    /// Probability that each object label appears in a scene.
    pub presence: f64,
    pub circle_fraction: f64,
    /// Reject layouts whose box prompts are ambiguous at this tile size.
    pub tile_size: u32,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            min_size: 48,
            max_size: 160,
            ground: Some(SceneLabel::plain("ground")),
            objects: ["building", "road", "tree", "car"]
                .into_iter()
                .map(SceneLabel::plain)
                .collect(),
            presence: 0.8,
            circle_fraction: 0.4,
            tile_size: u32::MAX,
        }
    }
}

/// Random layout of non-overlapping objects, at most one per label, on top of
/// an optional ground shape. With a ground and a nonempty object list, at
/// least one object is placed. Colors start at `first_color` so scenes generated
/// with disjoint ranges can share one backend.
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneGenConfig, first_color: usize) -> MockScene {
    loop {
        let scene = try_generate(rng, cfg, first_color);
        // a lone ground shape has a constant similarity map
        let degenerate = cfg.ground.is_some() && !cfg.objects.is_empty() && scene.shapes.len() == 1;
        if !degenerate && !scene.has_box_ambiguity(cfg.tile_size) {
            return scene;
        }
    }
}

fn try_generate<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneGenConfig, first_color: usize) -> MockScene {
    let w = rng.random_range(cfg.min_size..=cfg.max_size);
    let h = rng.random_range(cfg.min_size..=cfg.max_size);
    let mut placed: Vec<(u32, u32, u32, u32)> = Vec::new();
    let mut shapes = Vec::new();
    let to_scores = |l: &SceneLabel| -> BTreeMap<String, f64> { l.scores.iter().cloned().collect() };
    for obj in &cfg.objects {
        if !rng.random_bool(cfg.presence) {
            continue;
        }
        for _attempt in 0..20 {
            let max_side = (w.min(h) / 2).max(4);
            let sw = rng.random_range(3..=max_side);
            let sh = rng.random_range(3..=max_side);
            let x0 = rng.random_range(0..=w - sw);
            let y0 = rng.random_range(0..=h - sh);
            let rect = (x0, y0, x0 + sw, y0 + sh);
            // one pixel of clearance between objects
            let clear = placed
                .iter()
                .all(|&(a0, b0, a1, b1)| rect.2 < a0 || a1 < rect.0 || rect.3 < b0 || b1 < rect.1);
            if !clear {
                continue;
            }
            placed.push(rect);
            let geometry = if rng.random_bool(cfg.circle_fraction) {
                let side = sw.min(sh) as f64;
                Geometry::Circle {
                    cx: x0 as f64 + side / 2.0,
                    cy: y0 as f64 + side / 2.0,
                    r: side / 2.0,
                }
            } else {
                Geometry::Rect {
                    x0,
                    y0,
                    x1: x0 + sw,
                    y1: y0 + sh,
                }
            };
            shapes.push(MockShape {
                geometry,
                label: obj.label.clone(),
                scores: to_scores(obj),
                color: None,
            });
            break;
        }
    }
    if let Some(ground) = &cfg.ground {
        shapes.push(MockShape {
            geometry: Geometry::Rect {
                x0: 0,
                y0: 0,
                x1: w,
                y1: h,
            },
            label: ground.label.clone(),
            scores: to_scores(ground),
            color: None,
        });
    }
    for (i, s) in shapes.iter_mut().enumerate() {
        s.color = Some(default_shape_color(first_color + i));
    }
    MockScene { w, h, shapes }
}
