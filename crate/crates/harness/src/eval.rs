//! Batch evaluation over a dataset manifest.
//!
//! Work is split into (item, tile) units run on a bounded pool. Results are
//! collected in unit order and counts are summed in item order, so a record
//! does not depend on the pool size.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use text2seg_core::dataset::{decode_gt, stitch, tile_image, DecodedGt, TileGrid};
use text2seg_core::metrics::{
    aggregate, best_over_classes, confusion_counts, ClassReport, ConfusionCounts, DatasetReport,
};
use text2seg_core::strategies::{run_baseline, run_strategy};
use text2seg_core::{
    Backend, BinaryMask, ClassSpec, DatasetManifest, ImageRaster, StrategyId, StrategyParams, StrategyTrace,
};

use crate::config::{open_backend, ConfigSnapshot, RunConfig};
use crate::error::{HarnessError, Result};

/// Tiles are padded with black, which the mock backend reads as "no shape".
pub const PAD_RGB: [u8; 3] = [0, 0, 0];

/// Method name used for baseline rows.
pub const BASELINE: &str = "baseline";

/// One strategy run on one tile.
pub fn segment_tile(
    backend: &dyn Backend,
    tile: &ImageRaster,
    spec: &ClassSpec,
    strategy: StrategyId,
    params: &StrategyParams,
) -> text2seg_core::Result<StrategyTrace> {
    run_strategy(backend, tile, spec, strategy, params)
}

/// A full-frame prediction assembled from per-tile runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub grid: TileGrid,
    pub mask: BinaryMask,
    pub traces: Vec<StrategyTrace>,
}

/// Tiles `image`, runs `strategy` on every tile in order and stitches the
/// result. Produces the same mask as [`evaluate`] for the same inputs.
pub fn segment_image(
    backend: &dyn Backend,
    image: &ImageRaster,
    tile_size: u32,
    spec: &ClassSpec,
    strategy: StrategyId,
    params: &StrategyParams,
) -> text2seg_core::Result<Segmentation> {
    let (grid, tiles) = tile_image(image, tile_size, PAD_RGB)?;
    let traces = tiles
        .iter()
        .map(|t| segment_tile(backend, t, spec, strategy, params))
        .collect::<text2seg_core::Result<Vec<_>>>()?;
    let masks: Vec<BinaryMask> = traces.iter().map(|t| t.final_mask.clone()).collect();
    let mask = stitch(&grid, &masks)?;
    Ok(Segmentation { grid, mask, traces })
}

/// Baseline seed for one tile, derived from the run seed.
pub fn tile_seed(seed: u64, item: usize, tile: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ item as u64) ^ tile as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemClassReport {
    pub item: String,
    /// Strategy code, or `"baseline"`.
    pub strategy: String,
    pub report: ClassReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: StrategyId,
    pub report: DatasetReport,
}

/// Class-agnostic baseline scored against every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub classes: Vec<ClassReport>,
    /// Best per-class IoU; the figure reported as the baseline overall.
    pub best_iou: f64,
    pub best_oa: f64,
    pub mean_iou: f64,
    pub mean_oa: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub item: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileTrace {
    pub item: String,
    pub tile: usize,
    pub trace: StrategyTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ConfigSnapshot,
    pub dataset: String,
    pub model_ids: BTreeMap<String, String>,
    /// Classes as prompted: with synonyms only when augmentation is on.
    pub classes: Vec<ClassSpec>,
    pub item_reports: Vec<ItemClassReport>,
    pub strategies: Vec<StrategyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineReport>,
    pub failures: Vec<ItemFailure>,
    /// Items without ground truth.
    pub skipped: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<TileTrace>>,
}

impl RunRecord {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn strategy_report(&self, id: StrategyId) -> Option<&DatasetReport> {
        self.strategies.iter().find(|s| s.strategy == id).map(|s| &s.report)
    }
}

/// Loads the manifest and backend named by `config` and evaluates.
pub fn evaluate(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let manifest = DatasetManifest::load(&config.manifest).map_err(|e| HarnessError::config(e.to_string()))?;
    let open = open_backend(&config.backend)?;
    evaluate_with(config, &manifest, open.backend.as_ref(), open.model_ids)
}

struct LoadedItem {
    id: String,
    grid: TileGrid,
    tiles: Vec<ImageRaster>,
    gt: DecodedGt,
}

#[derive(Default)]
struct TileOutput {
    /// `[class][strategy]`
    masks: Vec<Vec<BinaryMask>>,
    baseline: Option<BinaryMask>,
    traces: Vec<StrategyTrace>,
}

fn load_item(manifest: &DatasetManifest, index: usize) -> std::result::Result<Option<LoadedItem>, String> {
    let item = &manifest.items[index];
    let Some(gt) = manifest.load_gt(item).map_err(|e| e.to_string())? else {
        return Ok(None);
    };
    let image = manifest.load_image(item).map_err(|e| e.to_string())?;
    if gt.dims() != image.dims() {
        return Err(format!(
            "ground truth is {:?} but image is {:?}",
            gt.dims(),
            image.dims()
        ));
    }
    let gt = decode_gt(&gt, manifest).map_err(|e| e.to_string())?;
    let (grid, tiles) = tile_image(&image, manifest.tile_size, PAD_RGB).map_err(|e| e.to_string())?;
    Ok(Some(LoadedItem {
        id: item.id(),
        grid,
        tiles,
        gt,
    }))
}

/// Evaluates against an already opened manifest and backend.
pub fn evaluate_with(
    config: &RunConfig,
    manifest: &DatasetManifest,
    backend: &dyn Backend,
    model_ids: BTreeMap<String, String>,
) -> Result<RunRecord> {
    config.validate()?;
    manifest.validate().map_err(|e| HarnessError::config(e.to_string()))?;
    let strategies = config.ordered_strategies();
    let classes: Vec<ClassSpec> = manifest
        .classes
        .iter()
        .map(|c| if config.augment { c.clone() } else { c.plain() })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| HarnessError::config(format!("worker pool: {e}")))?;

    let loaded: Vec<std::result::Result<Option<LoadedItem>, String>> = pool.install(|| {
        (0..manifest.items.len())
            .into_par_iter()
            .map(|i| load_item(manifest, i))
            .collect()
    });

    let mut failures = Vec::new();
    let mut skipped = Vec::new();
    let mut items: Vec<(usize, LoadedItem)> = Vec::new();
    for (i, l) in loaded.into_iter().enumerate() {
        match l {
            Ok(Some(item)) => items.push((i, item)),
            Ok(None) => skipped.push(manifest.items[i].id()),
            Err(error) => failures.push((
                i,
                ItemFailure {
                    item: manifest.items[i].id(),
                    error,
                },
            )),
        }
    }

    let units: Vec<(usize, usize)> = items
        .iter()
        .enumerate()
        .flat_map(|(k, (_, it))| (0..it.tiles.len()).map(move |t| (k, t)))
        .collect();
    let run_unit = |&(k, t): &(usize, usize)| -> std::result::Result<TileOutput, String> {
        let (index, item) = &items[k];
        let tile = &item.tiles[t];
        let mut out = TileOutput::default();
        for spec in &classes {
            let mut per_strategy = Vec::with_capacity(strategies.len());
            for &s in &strategies {
                let trace = segment_tile(backend, tile, spec, s, &config.params)
                    .map_err(|e| format!("tile {t}, class {:?}, {s}: {e}", spec.label))?;
                per_strategy.push(trace.final_mask.clone());
                if config.keep_traces {
                    out.traces.push(trace);
                }
            }
            out.masks.push(per_strategy);
        }
        if config.baseline {
            let mask = baseline_tile(
                backend,
                tile,
                item.grid.valid_extent(t),
                tile_seed(config.seed, *index, t),
            )
            .map_err(|e| format!("tile {t}, baseline: {e}"))?;
            out.baseline = Some(mask);
        }
        Ok(out)
    };
    let outputs: Vec<std::result::Result<TileOutput, String>> =
        pool.install(|| units.par_iter().map(run_unit).collect());

    let n_classes = classes.len();
    let mut totals = vec![vec![ConfusionCounts::default(); strategies.len()]; n_classes];
    let mut baseline_totals = vec![ConfusionCounts::default(); n_classes];
    let mut item_reports = Vec::new();
    let mut traces = Vec::new();
    let mut scored = 0usize;
    let mut outputs = outputs.into_iter();
    for (index, item) in &items {
        let tile_outputs: Vec<_> = outputs.by_ref().take(item.tiles.len()).collect();
        let scored_item = score_item(item, tile_outputs, &classes, &strategies).and_then(|scores| {
            let mut reports = Vec::new();
            for (c, row) in scores.strategy.iter().enumerate() {
                for (s, counts) in row.iter().enumerate() {
                    reports.push((strategies[s].code(), c, *counts));
                }
            }
            for (c, counts) in scores.baseline.iter().flatten().enumerate() {
                reports.push((BASELINE, c, *counts));
            }
            let reports = reports
                .into_iter()
                .map(|(method, c, counts)| {
                    ClassReport::from_counts(classes[c].id, &classes[c].label, counts).map(|report| ItemClassReport {
                        item: item.id.clone(),
                        strategy: method.into(),
                        report,
                    })
                })
                .collect::<text2seg_core::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            Ok((scores, reports))
        });
        match scored_item {
            Ok((scores, reports)) => {
                for (c, row) in scores.strategy.iter().enumerate() {
                    for (s, counts) in row.iter().enumerate() {
                        totals[c][s] += *counts;
                    }
                }
                for (c, counts) in scores.baseline.iter().flatten().enumerate() {
                    baseline_totals[c] += *counts;
                }
                item_reports.extend(reports);
                traces.extend(scores.traces.into_iter().map(|(tile, trace)| TileTrace {
                    item: item.id.clone(),
                    tile,
                    trace,
                }));
                scored += 1;
            }
            Err(error) => failures.push((
                *index,
                ItemFailure {
                    item: item.id.clone(),
                    error,
                },
            )),
        }
    }
    failures.sort_by_key(|(i, _)| *i);

    let mut strategy_reports = Vec::new();
    let mut baseline = None;
    if scored > 0 {
        for (s, &id) in strategies.iter().enumerate() {
            let reports = classes
                .iter()
                .enumerate()
                .map(|(c, spec)| ClassReport::from_counts(spec.id, &spec.label, totals[c][s]))
                .collect::<text2seg_core::Result<Vec<_>>>()?;
            strategy_reports.push(StrategyReport {
                strategy: id,
                report: aggregate(&reports)?,
            });
        }
        if config.baseline {
            let reports = classes
                .iter()
                .enumerate()
                .map(|(c, spec)| ClassReport::from_counts(spec.id, &spec.label, baseline_totals[c]))
                .collect::<text2seg_core::Result<Vec<_>>>()?;
            baseline = Some(baseline_report(reports)?);
        }
    }

    Ok(RunRecord {
        config: config.snapshot(),
        dataset: manifest.name.clone(),
        model_ids,
        classes,
        item_reports,
        strategies: strategy_reports,
        baseline,
        failures: failures.into_iter().map(|(_, f)| f).collect(),
        skipped,
        traces: config.keep_traces.then_some(traces),
    })
}

/// Baseline on the unpadded `extent` of a tile, so the random point never
/// lands in padding. The mask is returned at tile size.
pub fn baseline_tile(
    backend: &dyn Backend,
    tile: &ImageRaster,
    extent: (u32, u32),
    seed: u64,
) -> text2seg_core::Result<BinaryMask> {
    let (vw, vh) = extent;
    if extent == tile.dims() {
        return run_baseline(backend, tile, seed);
    }
    let mut valid = ImageRaster::filled(vw, vh, PAD_RGB)?;
    for y in 0..vh {
        for x in 0..vw {
            valid.set_pixel(x, y, tile.pixel(x, y));
        }
    }
    let mask = run_baseline(backend, &valid, seed)?;
    Ok(BinaryMask::from_fn(tile.width(), tile.height(), |x, y| {
        x < vw && y < vh && mask.get(x, y)
    }))
}

pub fn baseline_report(classes: Vec<ClassReport>) -> Result<BaselineReport> {
    let mean = aggregate(&classes)?;
    Ok(BaselineReport {
        best_iou: best_over_classes(classes.iter().map(|c| (c.class_id, c.iou)))?,
        best_oa: best_over_classes(classes.iter().map(|c| (c.class_id, c.oa)))?,
        mean_iou: mean.miou,
        mean_oa: mean.oa,
        classes,
    })
}

struct ItemScores {
    /// `[class][strategy]`
    strategy: Vec<Vec<ConfusionCounts>>,
    baseline: Option<Vec<ConfusionCounts>>,
    traces: Vec<(usize, StrategyTrace)>,
}

fn score_item(
    item: &LoadedItem,
    outputs: Vec<std::result::Result<TileOutput, String>>,
    classes: &[ClassSpec],
    strategies: &[StrategyId],
) -> std::result::Result<ItemScores, String> {
    let outputs: Vec<TileOutput> = outputs.into_iter().collect::<std::result::Result<_, _>>()?;
    let ignore = Some(&item.gt.ignore);
    let mut strategy = Vec::with_capacity(classes.len());
    for c in 0..classes.len() {
        let mut row = Vec::with_capacity(strategies.len());
        for s in 0..strategies.len() {
            let tiles: Vec<BinaryMask> = outputs.iter().map(|o| o.masks[c][s].clone()).collect();
            let pred = stitch(&item.grid, &tiles).map_err(|e| e.to_string())?;
            row.push(confusion_counts(&pred, &item.gt.classes[c], ignore).map_err(|e| e.to_string())?);
        }
        strategy.push(row);
    }
    let baseline = match outputs.iter().map(|o| o.baseline.clone()).collect::<Option<Vec<_>>>() {
        Some(tiles) if !tiles.is_empty() => {
            let pred = stitch(&item.grid, &tiles).map_err(|e| e.to_string())?;
            Some(
                item.gt
                    .classes
                    .iter()
                    .map(|gt| confusion_counts(&pred, gt, ignore).map_err(|e| e.to_string()))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            )
        }
        _ => None,
    };
    let traces = outputs
        .into_iter()
        .enumerate()
        .flat_map(|(t, o)| o.traces.into_iter().map(move |tr| (t, tr)))
        .collect();
    Ok(ItemScores {
        strategy,
        baseline,
        traces,
    })
}
