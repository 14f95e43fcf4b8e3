//! The five prompting strategies, the embedding filter over instance
//! galleries, and the random-point baseline.
//!
//! | id | composition |
//! |----|-------------|
//! | s1 | detector boxes → segmenter |
//! | s2 | similarity-map points → segmenter |
//! | s3 | automatic gallery → embedding filter |
//! | s4 | s1 ∪ s2 |
//! | s5 | s4 candidates → embedding filter |

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{wire, Backend, BackendError, Capability, Embedding};
use crate::error::{Error, Result};
use crate::promptgen::{generate_box_prompts, sample_similarity_points, ClassSpec, PromptParams, VisualPrompt};
use crate::raster::{crop_to_bbox, BinaryMask, ImageRaster, InstanceMask, PointPrompt, SimilarityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyId {
    #[serde(rename = "s1")]
    S1BoxPrompted,
    #[serde(rename = "s2")]
    S2PointPrompted,
    #[serde(rename = "s3")]
    S3GalleryFiltered,
    #[serde(rename = "s4")]
    S4BoxPlusPoint,
    #[serde(rename = "s5")]
    S5All,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] = [
        StrategyId::S1BoxPrompted,
        StrategyId::S2PointPrompted,
        StrategyId::S3GalleryFiltered,
        StrategyId::S4BoxPlusPoint,
        StrategyId::S5All,
    ];

    pub fn code(self) -> &'static str {
        match self {
            StrategyId::S1BoxPrompted => "s1",
            StrategyId::S2PointPrompted => "s2",
            StrategyId::S3GalleryFiltered => "s3",
            StrategyId::S4BoxPlusPoint => "s4",
            StrategyId::S5All => "s5",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::S1BoxPrompted => "box_prompted",
            StrategyId::S2PointPrompted => "point_prompted",
            StrategyId::S3GalleryFiltered => "gallery_filtered",
            StrategyId::S4BoxPlusPoint => "box_plus_point",
            StrategyId::S5All => "all",
        }
    }

    /// Column heading used in reports.
    pub fn display(self) -> &'static str {
        match self {
            StrategyId::S1BoxPrompted => "GDINO+SAM",
            StrategyId::S2PointPrompted => "CLIPS+SAM",
            StrategyId::S3GalleryFiltered => "SAM+CLIP",
            StrategyId::S4BoxPlusPoint => "GDINO+CLIPS+SAM",
            StrategyId::S5All => "GDINO+CLIPS+SAM+CLIP",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            StrategyId::S1BoxPrompted => "detector boxes per phrase prompt the segmenter; union of masks",
            StrategyId::S2PointPrompted => "top similarity-map points per phrase prompt the segmenter",
            StrategyId::S3GalleryFiltered => "automatic instance gallery filtered by text/image embedding similarity",
            StrategyId::S4BoxPlusPoint => "union of the box-prompted and point-prompted results",
            StrategyId::S5All => "box and point masks filtered by embedding similarity",
        }
    }

    pub fn required_capabilities(self) -> &'static [Capability] {
        use Capability::*;
        match self {
            StrategyId::S1BoxPrompted => &[Detect, SegmentPrompts],
            StrategyId::S2PointPrompted => &[Similarity, SegmentPrompts],
            StrategyId::S3GalleryFiltered => &[SegmentAuto, EmbedImage, EmbedText],
            StrategyId::S4BoxPlusPoint => &[Detect, Similarity, SegmentPrompts],
            StrategyId::S5All => &[Detect, Similarity, SegmentPrompts, SegmentAuto, EmbedImage, EmbedText],
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase();
        StrategyId::ALL
            .into_iter()
            .find(|id| {
                key == id.code()
                    || key == id.name()
                    || key == id.display().to_lowercase()
                    || key == format!("{:?}", id).to_lowercase()
            })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Contrast phrases an instance must lose against to be selected.
    pub background_phrases: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            background_phrases: vec!["background".into(), "other object".into()],
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.background_phrases.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one background phrase is required".into(),
            ));
        }
        Ok(())
    }
}

/// Which masks the final filtering stage of s5 looks at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S5Candidates {
    /// Box and point masks produced by the s4 stages.
    #[default]
    S4Masks,
    /// s4 masks followed by a fresh automatic gallery. The final mask is then
    /// no longer bounded by s4.
    S4MasksAndGallery,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    #[serde(default)]
    pub prompt: PromptParams,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub s5_candidates: S5Candidates,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        self.prompt.validate()?;
        self.filter.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    Box { index: usize },
    Points,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedInstance {
    pub source: InstanceSource,
    pub mask: BinaryMask,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryVerdict {
    /// Index into the trace's `instances`.
    pub instance: usize,
    pub selected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_phrase: Option<String>,
    /// Best cosine similarity against the class phrases.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synonym_score: Option<f64>,
    /// Best cosine similarity against the background phrases.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A normalized similarity map with the phrase that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPhraseMap", into = "RawPhraseMap")]
pub struct PhraseMap {
    pub phrase: String,
    pub map: SimilarityMap,
}

#[derive(Serialize, Deserialize)]
struct RawPhraseMap {
    phrase: String,
    w: u32,
    h: u32,
    values_f32_b64: String,
}

impl From<PhraseMap> for RawPhraseMap {
    fn from(p: PhraseMap) -> Self {
        let wire = wire::SimilarityResponse::from(&p.map);
        RawPhraseMap {
            phrase: p.phrase,
            w: wire.w,
            h: wire.h,
            values_f32_b64: wire.values_f32_b64,
        }
    }
}

impl TryFrom<RawPhraseMap> for PhraseMap {
    type Error = String;

    fn try_from(raw: RawPhraseMap) -> std::result::Result<Self, String> {
        let map = wire::SimilarityResponse {
            w: raw.w,
            h: raw.h,
            values_f32_b64: raw.values_f32_b64,
        }
        .to_map()?;
        Ok(PhraseMap {
            phrase: raw.phrase,
            map,
        })
    }
}

/// Everything one strategy run looked at and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTrace {
    pub strategy: StrategyId,
    pub class: ClassSpec,
    pub prompts: VisualPrompt,
    pub similarity_maps: Vec<PhraseMap>,
    pub instances: Vec<TracedInstance>,
    pub gallery: Vec<GalleryVerdict>,
    pub notes: Vec<String>,
    pub final_mask: BinaryMask,
}

impl StrategyTrace {
    fn new(strategy: StrategyId, class: &ClassSpec, width: u32, height: u32) -> Self {
        Self {
            strategy,
            class: class.clone(),
            prompts: VisualPrompt::default(),
            similarity_maps: Vec::new(),
            instances: Vec::new(),
            gallery: Vec::new(),
            notes: Vec::new(),
            final_mask: BinaryMask::empty(width, height),
        }
    }

    fn push_instance(&mut self, source: InstanceSource, inst: InstanceMask) {
        self.instances.push(TracedInstance {
            source,
            mask: inst.mask,
            confidence: inst.confidence,
        });
    }

    fn union_of(&self, which: impl Fn(usize) -> bool) -> BinaryMask {
        let mut out = self.final_mask.clone();
        for (i, inst) in self.instances.iter().enumerate() {
            if which(i) {
                out.union_with(&inst.mask).expect("instance dims checked on insert");
            }
        }
        out
    }
}

fn check_dims(image: &ImageRaster, instances: &[InstanceMask]) -> Result<()> {
    for inst in instances {
        if inst.mask.dims() != image.dims() {
            return Err(Error::DimensionMismatch {
                expected: image.dims(),
                found: inst.mask.dims(),
            });
        }
    }
    Ok(())
}

fn ensure_capabilities(backend: &dyn Backend, id: StrategyId) -> Result<()> {
    let caps = backend.capabilities();
    if let Some(missing) = id.required_capabilities().iter().find(|c| !caps.contains(c)) {
        return Err(Error::Backend {
            stage: id.code().into(),
            source: BackendError::unsupported(format!("backend lacks the {missing:?} capability")),
        });
    }
    Ok(())
}

fn box_stage(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    params: &StrategyParams,
    trace: &mut StrategyTrace,
) -> Result<()> {
    let p = &params.prompt;
    let boxes = generate_box_prompts(backend, image, spec, p.box_threshold, p.text_threshold)?;
    if boxes.is_empty() {
        trace.notes.push("no boxes above threshold".into());
    }
    for (index, b) in boxes.iter().enumerate() {
        let hypotheses = backend
            .segment_prompts(image, &[], std::slice::from_ref(b))
            .map_err(Error::backend(format!("{} segment box {index}", trace.strategy)))?;
        check_dims(image, &hypotheses)?;
        // single prompt: keep the most confident hypothesis, first on ties
        let best = hypotheses
            .into_iter()
            .reduce(|a, b| if b.confidence > a.confidence { b } else { a });
        match best {
            Some(inst) => trace.push_instance(InstanceSource::Box { index }, inst),
            None => trace.notes.push(format!("box {index} produced no mask")),
        }
    }
    trace.prompts.boxes.extend(boxes);
    Ok(())
}

fn point_stage(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    params: &StrategyParams,
    trace: &mut StrategyTrace,
) -> Result<()> {
    let sampled = sample_similarity_points(backend, image, spec, &params.prompt.points)?;
    trace
        .similarity_maps
        .extend(sampled.maps.into_iter().map(|(phrase, map)| PhraseMap { phrase, map }));
    if sampled.points.is_empty() {
        trace.notes.push("no similarity points above threshold".into());
        return Ok(());
    }
    let instances = backend
        .segment_prompts(image, &sampled.points, &[])
        .map_err(Error::backend(format!("{} segment points", trace.strategy)))?;
    check_dims(image, &instances)?;
    for inst in instances {
        trace.push_instance(InstanceSource::Points, inst);
    }
    trace.prompts.points.extend(sampled.points);
    Ok(())
}

fn auto_stage(
    backend: &dyn Backend,
    image: &ImageRaster,
    params: &StrategyParams,
    trace: &mut StrategyTrace,
) -> Result<()> {
    let gallery = backend
        .segment_auto(image, params.prompt.grid_n)
        .map_err(Error::backend(format!("{} segment_auto", trace.strategy)))?;
    check_dims(image, &gallery)?;
    trace.notes.push(format!(
        "automatic gallery of {} instances, grid_n={}",
        gallery.len(),
        params.prompt.grid_n
    ));
    for inst in gallery {
        trace.push_instance(InstanceSource::Auto, inst);
    }
    Ok(())
}

/// Applies the filter to `trace.instances[from..]` and records verdicts.
fn filter_stage(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    params: &StrategyParams,
    trace: &mut StrategyTrace,
    from: usize,
) -> Result<Vec<usize>> {
    let gallery: Vec<InstanceMask> = trace.instances[from..]
        .iter()
        .map(|t| InstanceMask {
            mask: t.mask.clone(),
            confidence: t.confidence,
        })
        .collect();
    let outcome = filter_gallery(backend, image, &gallery, spec, &params.filter).map_err(|e| match e {
        Error::Backend { stage, source } => Error::Backend {
            stage: format!("{} {stage}", trace.strategy),
            source,
        },
        other => other,
    })?;
    let mut selected = Vec::new();
    for mut v in outcome.verdicts {
        v.instance += from;
        if v.selected {
            selected.push(v.instance);
        }
        trace.gallery.push(v);
    }
    Ok(selected)
}

/// Runs one strategy for one class on one image.
///
/// Stages that produce no prompts leave the final mask empty; only backend
/// failures are errors.
pub fn run_strategy(
    backend: &dyn Backend,
    image: &ImageRaster,
    spec: &ClassSpec,
    id: StrategyId,
    params: &StrategyParams,
) -> Result<StrategyTrace> {
    spec.validate()?;
    params.validate()?;
    ensure_capabilities(backend, id)?;
    let mut trace = StrategyTrace::new(id, spec, image.width(), image.height());
    match id {
        StrategyId::S1BoxPrompted => {
            box_stage(backend, image, spec, params, &mut trace)?;
            trace.final_mask = trace.union_of(|_| true);
        }
        StrategyId::S2PointPrompted => {
            point_stage(backend, image, spec, params, &mut trace)?;
            trace.final_mask = trace.union_of(|_| true);
        }
        StrategyId::S3GalleryFiltered => {
            auto_stage(backend, image, params, &mut trace)?;
            let selected = filter_stage(backend, image, spec, params, &mut trace, 0)?;
            trace.final_mask = trace.union_of(|i| selected.contains(&i));
        }
        StrategyId::S4BoxPlusPoint => {
            box_stage(backend, image, spec, params, &mut trace)?;
            point_stage(backend, image, spec, params, &mut trace)?;
            trace.final_mask = trace.union_of(|_| true);
        }
        StrategyId::S5All => {
            box_stage(backend, image, spec, params, &mut trace)?;
            point_stage(backend, image, spec, params, &mut trace)?;
            if params.s5_candidates == S5Candidates::S4MasksAndGallery {
                auto_stage(backend, image, params, &mut trace)?;
            }
            let selected = filter_stage(backend, image, spec, params, &mut trace, 0)?;
            trace.final_mask = trace.union_of(|i| selected.contains(&i));
        }
    }
    Ok(trace)
}

/// Result of [`filter_gallery`]: the kept instances and a verdict per input.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub selected: Vec<InstanceMask>,
    pub verdicts: Vec<GalleryVerdict>,
}

/// Keeps the instances whose crop embeds closer to one of the class phrases
/// than to every background phrase. Ties go to the background.
pub fn filter_gallery(
    backend: &dyn Backend,
    image: &ImageRaster,
    gallery: &[InstanceMask],
    spec: &ClassSpec,
    cfg: &FilterConfig,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    check_dims(image, gallery)?;
    let mut outcome = FilterOutcome {
        selected: Vec::new(),
        verdicts: Vec::with_capacity(gallery.len()),
    };
    if gallery.is_empty() {
        return Ok(outcome);
    }
    let synonyms = spec.phrases();
    let all_phrases: Vec<String> = synonyms.iter().chain(&cfg.background_phrases).cloned().collect();
    let texts = backend
        .embed_texts(&all_phrases)
        .map_err(Error::backend("embed_text"))?;
    if texts.len() != all_phrases.len() {
        return Err(Error::Backend {
            stage: "embed_text".into(),
            source: BackendError::Protocol {
                endpoint: wire::EMBED_TEXT.into(),
                message: format!("{} vectors for {} phrases", texts.len(), all_phrases.len()),
            },
        });
    }
    let (syn_texts, bg_texts) = texts.split_at(synonyms.len());

    for (i, inst) in gallery.iter().enumerate() {
        if inst.mask.is_empty() {
            outcome.verdicts.push(GalleryVerdict {
                instance: i,
                selected: false,
                best_phrase: None,
                synonym_score: None,
                background_score: None,
                note: Some("empty mask skipped".into()),
            });
            continue;
        }
        let crop = crop_to_bbox(image, &inst.mask)?;
        let emb = backend
            .embed_image(&crop)
            .map_err(Error::backend(format!("embed_image instance {i}")))?;
        let (syn_idx, syn_score) = best_match(&emb, syn_texts);
        let (bg_idx, bg_score) = best_match(&emb, bg_texts);
        let selected = syn_score > bg_score;
        let best_phrase = if selected {
            synonyms[syn_idx].clone()
        } else {
            cfg.background_phrases[bg_idx].clone()
        };
        if selected {
            outcome.selected.push(inst.clone());
        }
        outcome.verdicts.push(GalleryVerdict {
            instance: i,
            selected,
            best_phrase: Some(best_phrase),
            synonym_score: Some(syn_score),
            background_score: Some(bg_score),
            note: None,
        });
    }
    Ok(outcome)
}

/// Index and value of the highest cosine similarity, first on ties.
fn best_match(emb: &Embedding, texts: &[Embedding]) -> (usize, f64) {
    texts.iter().map(|t| emb.cosine(t)).enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, s)| if s > best.1 { (i, s) } else { best },
    )
}

/// Spec-named alias for [`filter_gallery`].
pub fn clip_filter_gallery(
    backend: &dyn Backend,
    image: &ImageRaster,
    gallery: &[InstanceMask],
    spec: &ClassSpec,
    cfg: &FilterConfig,
) -> Result<Vec<InstanceMask>> {
    Ok(filter_gallery(backend, image, gallery, spec, cfg)?.selected)
}

/// The uniformly random point used by the baseline for a given seed.
pub fn baseline_point(width: u32, height: u32, seed: u64) -> PointPrompt {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.random_range(0..width);
    let y = rng.random_range(0..height);
    PointPrompt::foreground(x, y)
}

/// Class-agnostic baseline: one seeded random point, most confident mask.
pub fn run_baseline(backend: &dyn Backend, image: &ImageRaster, seed: u64) -> Result<BinaryMask> {
    let point = baseline_point(image.width(), image.height(), seed);
    let hypotheses = backend
        .segment_prompts(image, &[point], &[])
        .map_err(Error::backend("baseline segment"))?;
    check_dims(image, &hypotheses)?;
    Ok(hypotheses
        .into_iter()
        .reduce(|a, b| if b.confidence > a.confidence { b } else { a })
        .map(|i| i.mask)
        .unwrap_or_else(|| BinaryMask::empty(image.width(), image.height())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Capabilities, MockBackend, MockScene, MockShape};
    use crate::raster::{mask_iou, mask_union, BBox};

    fn street() -> MockScene {
        MockScene {
            w: 48,
            h: 32,
            shapes: vec![
                MockShape::rect(4, 4, 20, 16, "building"),
                MockShape::rect(30, 20, 40, 26, "car"),
            ],
        }
    }

    fn setup(scene: MockScene) -> (MockBackend, ImageRaster, MockScene) {
        let img = scene.render();
        (MockBackend::new(scene.clone()).unwrap(), img, scene)
    }

    #[test]
    fn strategy_names_parse() {
        for id in StrategyId::ALL {
            assert_eq!(id.code().parse::<StrategyId>().unwrap(), id);
            assert_eq!(id.display().parse::<StrategyId>().unwrap(), id);
        }
        assert_eq!(
            "S1_BoxPrompted".replace('_', "").parse::<StrategyId>().unwrap(),
            StrategyId::S1BoxPrompted
        );
        assert!("s9".parse::<StrategyId>().is_err());
        assert_eq!(serde_json::to_string(&StrategyId::S5All).unwrap(), "\"s5\"");
    }

    #[test]
    fn s1_recovers_building_exactly() {
        let (b, img, scene) = setup(street());
        let spec = ClassSpec::new(0, "building");
        let t = run_strategy(&b, &img, &spec, StrategyId::S1BoxPrompted, &Default::default()).unwrap();
        assert_eq!(mask_iou(&t.final_mask, &scene.label_mask("building")).unwrap(), 1.0);
        assert_eq!(t.prompts.boxes.len(), 1);
        assert_eq!(t.instances.len(), 1);
    }

    #[test]
    fn s2_and_s3_recover_car() {
        let (b, img, scene) = setup(street());
        let spec = ClassSpec::new(1, "car");
        for id in [
            StrategyId::S2PointPrompted,
            StrategyId::S3GalleryFiltered,
            StrategyId::S5All,
        ] {
            let t = run_strategy(&b, &img, &spec, id, &Default::default()).unwrap();
            assert_eq!(t.final_mask, scene.label_mask("car"), "{id}");
        }
    }

    #[test]
    fn s4_is_union_of_s1_and_s2() {
        let scene = MockScene {
            w: 48,
            h: 32,
            shapes: vec![
                MockShape::rect(4, 4, 20, 16, "building").with_scores([("building", 0.9)]),
                MockShape::circle(35.0, 10.0, 5.0, "tree").with_scores([("building", 0.3), ("tree", 1.0)]),
                MockShape::rect(30, 20, 40, 26, "car").with_scores([("building", 0.95)]),
            ],
        };
        let (b, img, _) = setup(scene);
        let spec = ClassSpec::new(0, "building");
        let params = StrategyParams::default();
        let s1 = run_strategy(&b, &img, &spec, StrategyId::S1BoxPrompted, &params).unwrap();
        let s2 = run_strategy(&b, &img, &spec, StrategyId::S2PointPrompted, &params).unwrap();
        let s4 = run_strategy(&b, &img, &spec, StrategyId::S4BoxPlusPoint, &params).unwrap();
        let s5 = run_strategy(&b, &img, &spec, StrategyId::S5All, &params).unwrap();
        assert_eq!(s4.final_mask, mask_union(&s1.final_mask, &s2.final_mask).unwrap());
        assert!(s5.final_mask.is_subset_of(&s4.final_mask));
        // the car answers to "building" but embeds as a car
        assert_ne!(s5.final_mask, s4.final_mask);
    }

    #[test]
    fn empty_scene_gives_empty_masks() {
        let (b, img, _) = setup(MockScene {
            w: 16,
            h: 16,
            shapes: vec![],
        });
        for id in StrategyId::ALL {
            let t = run_strategy(&b, &img, &ClassSpec::new(0, "building"), id, &Default::default()).unwrap();
            assert!(t.final_mask.is_empty(), "{id}");
            assert_eq!(t.final_mask.dims(), (16, 16));
        }
    }

    #[test]
    fn filter_selects_matching_instances() {
        let (b, img, scene) = setup(street());
        let gallery: Vec<InstanceMask> = b.segment_auto(&img, 8).unwrap();
        let spec = ClassSpec::new(1, "car");
        let out = filter_gallery(&b, &img, &gallery, &spec, &FilterConfig::default()).unwrap();
        assert_eq!(out.selected.len(), 1);
        assert_eq!(out.selected[0].mask, scene.label_mask("car"));
        let chosen = out.verdicts.iter().find(|v| v.selected).unwrap();
        assert_eq!(chosen.synonym_score, Some(1.0));
        assert_eq!(chosen.best_phrase.as_deref(), Some("car"));

        assert!(clip_filter_gallery(&b, &img, &[], &spec, &FilterConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn filter_excludes_background_matches_and_skips_empty() {
        let scene = MockScene {
            w: 16,
            h: 16,
            shapes: vec![MockShape::rect(2, 2, 8, 8, "clutter").with_scores([("background", 1.0)])],
        };
        let (b, img, _) = setup(scene);
        let mut gallery = b.segment_auto(&img, 4).unwrap();
        gallery.push(InstanceMask {
            mask: BinaryMask::empty(16, 16),
            confidence: 0.5,
        });
        let spec = ClassSpec::new(0, "clutter");
        let out = filter_gallery(&b, &img, &gallery, &spec, &FilterConfig::default()).unwrap();
        assert!(out.selected.is_empty());
        assert_eq!(out.verdicts[0].best_phrase.as_deref(), Some("background"));
        assert_eq!(out.verdicts[1].note.as_deref(), Some("empty mask skipped"));
    }

    #[test]
    fn filter_output_is_subsequence_and_permutation_invariant() {
        let (b, img, _) = setup(MockScene {
            w: 40,
            h: 40,
            shapes: vec![
                MockShape::rect(0, 0, 10, 10, "car"),
                MockShape::rect(12, 0, 20, 10, "tree"),
                MockShape::rect(0, 20, 10, 30, "car"),
                MockShape::circle(30.0, 30.0, 6.0, "building"),
            ],
        });
        let gallery = b.segment_auto(&img, 8).unwrap();
        let spec = ClassSpec::new(0, "car");
        let fwd = clip_filter_gallery(&b, &img, &gallery, &spec, &FilterConfig::default()).unwrap();
        let mut rev_in = gallery.clone();
        rev_in.reverse();
        let mut rev = clip_filter_gallery(&b, &img, &rev_in, &spec, &FilterConfig::default()).unwrap();
        rev.reverse();
        assert_eq!(fwd, rev);
        let mut it = gallery.iter();
        assert!(fwd.iter().all(|s| it.any(|g| g == s)));
        assert_eq!(fwd.len(), 2);
    }

    #[test]
    fn baseline_is_deterministic_and_hits_car() {
        let (b, img, scene) = setup(street());
        let a = run_baseline(&b, &img, 42).unwrap();
        assert_eq!(a, run_baseline(&b, &img, 42).unwrap());

        let tiny = ImageRaster::filled(1, 1, [0, 0, 0]).unwrap();
        assert_eq!(baseline_point(1, 1, 9), PointPrompt::foreground(0, 0));
        assert!(run_baseline(&b, &tiny, 9).unwrap().is_empty());

        let car = scene.label_mask("car");
        let seed = (0..10_000u64)
            .find(|&s| {
                let p = baseline_point(48, 32, s);
                car.get(p.x, p.y)
            })
            .expect("some seed lands on the car");
        assert_eq!(run_baseline(&b, &img, seed).unwrap(), car);
    }

    struct DetectOnly(MockBackend);

    impl Backend for DetectOnly {
        fn capabilities(&self) -> Capabilities {
            [Capability::Detect].into_iter().collect()
        }
        fn detect_boxes(&self, i: &ImageRaster, p: &[String], b: f64, t: f64) -> Result<Vec<BBox>, BackendError> {
            self.0.detect_boxes(i, p, b, t)
        }
        fn similarity_map(&self, _: &ImageRaster, _: &str) -> Result<SimilarityMap, BackendError> {
            Err(BackendError::unsupported("similarity"))
        }
        fn segment_prompts(
            &self,
            _: &ImageRaster,
            _: &[PointPrompt],
            _: &[BBox],
        ) -> Result<Vec<InstanceMask>, BackendError> {
            Err(BackendError::model("segmenter offline"))
        }
        fn segment_auto(&self, _: &ImageRaster, _: u32) -> Result<Vec<InstanceMask>, BackendError> {
            Err(BackendError::unsupported("segment_auto"))
        }
        fn embed_image(&self, _: &ImageRaster) -> Result<Embedding, BackendError> {
            Err(BackendError::unsupported("embed"))
        }
        fn embed_texts(&self, _: &[String]) -> Result<Vec<Embedding>, BackendError> {
            Err(BackendError::unsupported("embed"))
        }
    }

    #[test]
    fn missing_capability_is_reported_before_running() {
        let (b, img, _) = setup(street());
        let limited = DetectOnly(b);
        let err = run_strategy(
            &limited,
            &img,
            &ClassSpec::new(0, "building"),
            StrategyId::S1BoxPrompted,
            &Default::default(),
        )
        .unwrap_err();
        match err {
            Error::Backend { stage, source } => {
                assert_eq!(stage, "s1");
                assert_eq!(source.code(), crate::backend::ErrorCode::Unsupported);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_json_round_trips() {
        let (b, img, _) = setup(street());
        let t = run_strategy(
            &b,
            &img,
            &ClassSpec::new(1, "car"),
            StrategyId::S5All,
            &Default::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: StrategyTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(json.contains("\"values_f32_b64\""));
    }
}
