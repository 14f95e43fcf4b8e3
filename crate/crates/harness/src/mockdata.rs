//! Synthetic datasets rendered from generated mock scenes.
//!
//! Layout of the output directory:
//!
//! ```text
//! manifest.json
//! scenes/scene_000.json   mock backend input
//! images/scene_000.png    rendered scene
//! gt/scene_000.png        8-bit class index per pixel
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use text2seg_core::backend::{generate_scene, SceneGenConfig, SceneLabel};
use text2seg_core::dataset::ManifestItem;
use text2seg_core::{ClassSpec, DatasetManifest, GroundTruth, MockScene};

use crate::error::{HarnessError, Result};

pub const IGNORE_INDEX: u8 = 255;

#[derive(Debug, Clone)]
pub struct MockDatasetConfig {
    pub name: String,
    pub scenes: usize,
    pub seed: u64,
    pub tile_size: u32,
    pub scene: SceneGenConfig,
    /// Synonyms written to the manifest, by class label.
    pub synonyms: BTreeMap<String, Vec<String>>,
}

impl Default for MockDatasetConfig {
    fn default() -> Self {
        Self {
            name: "mock".into(),
            scenes: 8,
            seed: 0,
            tile_size: 256,
            scene: SceneGenConfig::default(),
            synonyms: BTreeMap::new(),
        }
    }
}

impl MockDatasetConfig {
    /// Objects answer only to a synonym, never to their own label, so that
    /// prompting with the label alone finds nothing.
    pub fn synonym_only(mut self) -> Self {
        let pairs = [
            ("building", "house"),
            ("road", "street"),
            ("tree", "vegetation"),
            ("car", "vehicle"),
        ];
        self.scene.objects = pairs
            .iter()
            .map(|(label, syn)| SceneLabel {
                label: label.to_string(),
                scores: vec![(syn.to_string(), 1.0)],
            })
            .collect();
        self.synonyms = pairs
            .iter()
            .map(|(label, syn)| (label.to_string(), vec![syn.to_string()]))
            .collect();
        self
    }

    /// Manifest classes: objects in order, then the ground label.
    pub fn classes(&self) -> Vec<ClassSpec> {
        self.scene
            .objects
            .iter()
            .map(|o| o.label.clone())
            .chain(self.scene.ground.iter().map(|g| g.label.clone()))
            .enumerate()
            .map(|(i, label)| {
                let syn = self.synonyms.get(&label).cloned().unwrap_or_default();
                ClassSpec::new(i as u32, label).with_synonyms(syn)
            })
            .collect()
    }

    /// Scenes generated with this config. Shape colours never repeat across
    /// scenes, so all of them can back one mock backend.
    pub fn generate_scenes(&self) -> Vec<MockScene> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut gen = self.scene.clone();
        gen.tile_size = self.tile_size;
        let mut next_color = 0;
        (0..self.scenes)
            .map(|_| {
                let scene = generate_scene(&mut rng, &gen, next_color);
                next_color += scene.shapes.len();
                scene
            })
            .collect()
    }
}

/// Index ground truth of a scene: the class of each pixel's visible shape,
/// `IGNORE_INDEX` where no shape is visible.
pub fn scene_ground_truth(scene: &MockScene, classes: &[ClassSpec]) -> Result<GroundTruth> {
    let ids: Vec<Option<u8>> = scene
        .shapes
        .iter()
        .map(|s| {
            classes
                .iter()
                .find(|c| c.label.eq_ignore_ascii_case(s.label.trim()))
                .map(|c| c.id as u8)
        })
        .collect();
    let values = scene
        .owner_map()
        .into_iter()
        .map(|o| o.and_then(|i| ids[i]).unwrap_or(IGNORE_INDEX))
        .collect();
    Ok(GroundTruth::indexed(scene.w, scene.h, values)?)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(HarnessError::io(dir.display().to_string()))?;
    }
    std::fs::write(path, bytes).map_err(HarnessError::io(path.display().to_string()))
}

/// Writes a complete mock dataset under `out` and returns the manifest path.
pub fn write_mock_dataset(out: &Path, cfg: &MockDatasetConfig) -> Result<PathBuf> {
    let classes = cfg.classes();
    let scenes = cfg.generate_scenes();
    let mut items = Vec::with_capacity(scenes.len());
    for (i, scene) in scenes.iter().enumerate() {
        let stem = format!("scene_{i:03}");
        let scene_json = serde_json::to_string_pretty(scene)? + "\n";
        write(&out.join("scenes").join(format!("{stem}.json")), scene_json.as_bytes())?;
        let image = format!("images/{stem}.png");
        let gt = format!("gt/{stem}.png");
        write(&out.join(&image), &scene.render().to_png()?)?;
        write(&out.join(&gt), &scene_ground_truth(scene, &classes)?.to_png()?)?;
        items.push(ManifestItem {
            id: None,
            image: image.into(),
            gt: Some(gt.into()),
        });
    }
    let manifest = DatasetManifest {
        name: cfg.name.clone(),
        tile_size: cfg.tile_size,
        ignore_index: IGNORE_INDEX,
        classes,
        palette: None,
        items,
        base_dir: out.to_path_buf(),
    };
    manifest.validate()?;
    let path = out.join("manifest.json");
    write(&path, (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(path)
}
