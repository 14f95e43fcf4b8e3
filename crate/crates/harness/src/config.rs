use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use text2seg_core::{Backend, MockBackend, MockScene, StrategyId, StrategyParams};
use text2seg_remote::RemoteBackend;

use crate::error::{HarnessError, Result};

pub const BACKEND_URL_ENV: &str = "TEXT2SEG_BACKEND_URL";

/// Where inference runs: a directory of mock scene files or a model server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendSpec {
    Mock(PathBuf),
    Remote(String),
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Mock(dir) => write!(f, "mock:{}", dir.display()),
            BackendSpec::Remote(url) => write!(f, "remote:{url}"),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(dir) = s.strip_prefix("mock:") {
            return Ok(BackendSpec::Mock(PathBuf::from(dir)));
        }
        if let Some(url) = s.strip_prefix("remote:") {
            return Ok(BackendSpec::Remote(url.to_string()));
        }
        Err(HarnessError::config(format!(
            "backend {s:?} is neither mock:DIR nor remote:URL"
        )))
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        b.to_string()
    }
}

impl BackendSpec {
    /// `remote:$TEXT2SEG_BACKEND_URL`, if the variable is set.
    pub fn from_env() -> Option<Self> {
        std::env::var(BACKEND_URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .map(BackendSpec::Remote)
    }
}

/// A backend ready for use, with the model identifiers it reported.
pub struct OpenBackend {
    pub backend: Arc<dyn Backend>,
    pub model_ids: BTreeMap<String, String>,
}

/// Reads every `*.json` scene in `dir`, in file-name order.
pub fn load_mock_scenes(dir: &Path) -> Result<Vec<MockScene>> {
    let entries = std::fs::read_dir(dir).map_err(HarnessError::io(format!("mock scenes {}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(HarnessError::io(p.display().to_string()))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::config(format!("mock scene {}: {e}", p.display())))
        })
        .collect()
}

pub fn open_backend(spec: &BackendSpec) -> Result<OpenBackend> {
    match spec {
        BackendSpec::Mock(dir) => {
            let scenes = load_mock_scenes(dir)?;
            if scenes.is_empty() {
                return Err(HarnessError::config(format!("no mock scenes in {}", dir.display())));
            }
            let backend = MockBackend::from_scenes(scenes).map_err(|e| HarnessError::config(e.to_string()))?;
            Ok(OpenBackend {
                backend: Arc::new(backend),
                model_ids: BTreeMap::from([("mock".to_string(), dir.display().to_string())]),
            })
        }
        BackendSpec::Remote(url) => {
            let backend = RemoteBackend::connect(url)
                .map_err(|e| HarnessError::config(format!("backend {url} unreachable: {e}")))?;
            let model_ids = backend.model_ids().clone();
            Ok(OpenBackend {
                backend: Arc::new(backend),
                model_ids,
            })
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub backend: BackendSpec,
    pub strategies: Vec<StrategyId>,
    #[serde(default)]
    pub params: StrategyParams,
    /// Prompt with every synonym of a class instead of its label alone.
    #[serde(default)]
    pub augment: bool,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default)]
    pub keep_traces: bool,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, backend: BackendSpec, strategies: Vec<StrategyId>) -> Self {
        Self {
            manifest: manifest.into(),
            backend,
            strategies,
            params: StrategyParams::default(),
            augment: false,
            baseline: false,
            seed: 0,
            out_dir: None,
            parallelism: 1,
            keep_traces: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        // relative paths in a config file are relative to the file
        if let Some(base) = path.parent() {
            if cfg.manifest.is_relative() {
                cfg.manifest = base.join(&cfg.manifest);
            }
            if let BackendSpec::Mock(dir) = &cfg.backend {
                if dir.is_relative() {
                    cfg.backend = BackendSpec::Mock(base.join(dir));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(HarnessError::config("at least one strategy is required"));
        }
        if self.parallelism == 0 {
            return Err(HarnessError::config("parallelism must be at least 1"));
        }
        self.params.validate().map_err(|e| HarnessError::config(e.to_string()))
    }

    /// Strategies in canonical report order, without repeats.
    pub fn ordered_strategies(&self) -> Vec<StrategyId> {
        let mut s = self.strategies.clone();
        s.sort();
        s.dedup();
        s
    }

    /// The parts of the config that determine results. Paths, output
    /// location and parallelism are left out.
    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            strategies: self.ordered_strategies(),
            params: self.params.clone(),
            augment: self.augment,
            baseline: self.baseline,
            seed: self.seed,
            keep_traces: self.keep_traces,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub strategies: Vec<StrategyId>,
    pub params: StrategyParams,
    pub augment: bool,
    pub baseline: bool,
    pub seed: u64,
    pub keep_traces: bool,
}
