#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use text2seg_core::metrics::{aggregate, ClassReport, ConfusionCounts};
use text2seg_core::{ClassSpec, StrategyId};
use text2seg_harness::config::{BackendSpec, RunConfig};
use text2seg_harness::eval::{baseline_report, ItemClassReport, RunRecord, StrategyReport};
use text2seg_harness::mockdata::{write_mock_dataset, MockDatasetConfig};

pub struct MockDataset {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
}

impl MockDataset {
    pub fn new(cfg: &MockDatasetConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_mock_dataset(dir.path(), cfg).unwrap();
        Self { dir, manifest }
    }

    pub fn scenes(&self) -> PathBuf {
        self.dir.path().join("scenes")
    }

    pub fn config(&self, strategies: &[StrategyId]) -> RunConfig {
        RunConfig::new(&self.manifest, BackendSpec::Mock(self.scenes()), strategies.to_vec())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `bytes` with a checked-in golden file, or rewrites it when
/// `UPDATE_GOLDEN` is set.
pub fn check_golden(name: &str, bytes: &[u8]) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, bytes).unwrap();
        return Ok(());
    }
    let want = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want == bytes {
        Ok(())
    } else {
        Err(format!(
            "{name} differs from golden:\n--- golden\n{}\n--- actual\n{}",
            String::from_utf8_lossy(&want),
            String::from_utf8_lossy(bytes)
        ))
    }
}

fn cc(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
    ConfusionCounts { tp, fp, fn_, tn }
}

/// A hand-built record with counts chosen so every figure is easy to check:
///
/// | class | method | tp fp fn tn | IoU | OA |
/// |-------|--------|-------------|-----|----|
/// | building | s1 | 30 10 10 50 | 0.6 | 0.8 |
/// | road | s1 | 20 0 5 75 | 0.8 | 0.95 |
/// | building | s3 | 10 30 30 30 | 1/7 | 0.4 |
/// | road | s3 | 0 0 0 100 | 1.0 | 1.0 |
/// | building | baseline | 5 5 35 55 | 0.111.. | 0.6 |
/// | road | baseline | 25 75 0 0 | 0.25 | 0.25 |
pub fn fixture_record() -> RunRecord {
    let classes = vec![
        ClassSpec::new(0, "building").with_synonyms(["house"]),
        ClassSpec::new(1, "road"),
    ];
    let rep = |c: &ClassSpec, counts| ClassReport::from_counts(c.id, &c.label, counts).unwrap();
    let s1 = vec![rep(&classes[0], cc(30, 10, 10, 50)), rep(&classes[1], cc(20, 0, 5, 75))];
    let s3 = vec![rep(&classes[0], cc(10, 30, 30, 30)), rep(&classes[1], cc(0, 0, 0, 100))];
    let base = vec![rep(&classes[0], cc(5, 5, 35, 55)), rep(&classes[1], cc(25, 75, 0, 0))];
    let mut item_reports = Vec::new();
    for (method, reports) in [("s1", &s1), ("s3", &s3), ("baseline", &base)] {
        for r in reports.iter() {
            item_reports.push(ItemClassReport {
                item: "tile_a".into(),
                strategy: method.into(),
                report: r.clone(),
            });
        }
    }
    let mut cfg = RunConfig::new(
        "fixture/manifest.json",
        BackendSpec::Mock(Path::new("fixture/scenes").into()),
        vec![StrategyId::S1BoxPrompted, StrategyId::S3GalleryFiltered],
    );
    cfg.baseline = true;
    cfg.augment = true;
    cfg.seed = 7;
    RunRecord {
        config: cfg.snapshot(),
        dataset: "Fixture".into(),
        model_ids: BTreeMap::from([("mock".to_string(), "fixture".to_string())]),
        classes,
        item_reports,
        strategies: vec![
            StrategyReport {
                strategy: StrategyId::S1BoxPrompted,
                report: aggregate(&s1).unwrap(),
            },
            StrategyReport {
                strategy: StrategyId::S3GalleryFiltered,
                report: aggregate(&s3).unwrap(),
            },
        ],
        baseline: Some(baseline_report(base).unwrap()),
        failures: vec![],
        skipped: vec![],
        traces: None,
    }
}

pub fn synonym_dataset_config(scenes: usize, seed: u64) -> MockDatasetConfig {
    MockDatasetConfig {
        scenes,
        seed,
        ..Default::default()
    }
    .synonym_only()
}
