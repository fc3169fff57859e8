use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError};
use super::mock::{MockBackend, MockBehavior};
use super::plugin::PluginBackend;
use super::HarnessError;
use crate::intervention::{InterventionPlan, ModelFamily, StrategyName};
use crate::prompt::{LadderId, PromptCategory};
use crate::scene::{VariationTag, INDEX_FILE};

/// Overrides `dataset_root` when set.
pub const ROOT_ENV: &str = "COUNTLAB_ROOT";

/// One experiment run, usually loaded from JSON.
///
/// Relative paths are resolved against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset_root: PathBuf,
    /// Variation tags to include; empty means every tag in the dataset.
    #[serde(default)]
    pub variations: Vec<VariationTag>,
    /// Ladders to ask; empty means the ladder matching each image's variation
    /// (`obj_color` for baseline images).
    #[serde(default)]
    pub categories: Vec<PromptCategory>,
    /// Rungs to keep; empty means every rung of the ladder.
    #[serde(default)]
    pub rungs: Vec<LadderId>,
    /// A mock id (`mock-oracle`, `mock-biased:0.8`, ...) or a plugin descriptor path.
    pub backend: String,
    #[serde(default = "baseline")]
    pub plan: StrategyName,
    /// Full plan JSON; takes precedence over `plan`.
    #[serde(default)]
    pub plan_file: Option<PathBuf>,
    /// JSONL output file.
    pub output: PathBuf,
    /// When set, must match the dataset's master seed.
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Parallel backend calls; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub capture: bool,
    /// Keep existing records and skip their keys instead of starting over.
    #[serde(default)]
    pub resume: bool,
    /// Stop after writing this many new records.
    #[serde(default)]
    pub max_records: Option<usize>,
    /// Passed to adapters untouched.
    #[serde(default)]
    pub options: serde_json::Value,
}

fn baseline() -> StrategyName {
    StrategyName::Baseline
}

fn default_batch() -> usize {
    32
}

impl ExperimentConfig {
    pub fn new(dataset_root: impl Into<PathBuf>, backend: impl Into<String>, output: impl Into<PathBuf>) -> Self {
        Self {
            dataset_root: dataset_root.into(),
            variations: Vec::new(),
            categories: Vec::new(),
            rungs: Vec::new(),
            backend: backend.into(),
            plan: StrategyName::Baseline,
            plan_file: None,
            output: output.into(),
            master_seed: None,
            batch_size: default_batch(),
            workers: 0,
            capture: false,
            resume: false,
            max_records: None,
            options: serde_json::Value::Null,
        }
    }

    /// Parses a config file and applies the environment override.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Some(root) = std::env::var_os(ROOT_ENV).filter(|v| !v.is_empty()) {
            self.dataset_root = PathBuf::from(root);
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be positive".into()));
        }
        if !self.dataset_root.join(INDEX_FILE).is_file() {
            return Err(HarnessError::Config(format!("no dataset at {}", self.dataset_root.display())));
        }
        Ok(())
    }

    pub fn backend(&self) -> Result<Box<dyn Backend>, HarnessError> {
        Ok(make_backend(&self.backend)?)
    }

    /// The plan to request, bound to the backend's layer geometry.
    pub fn resolve_plan(&self, family: ModelFamily) -> Result<InterventionPlan, HarnessError> {
        match &self.plan_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                InterventionPlan::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(InterventionPlan::new(self.plan, family)),
        }
    }
}

/// Mock ids map to [`MockBackend`]; anything else is read as a plugin descriptor file.
pub fn make_backend(id: &str) -> Result<Box<dyn Backend>, BackendError> {
    if let Some(b) = MockBehavior::parse_id(id) {
        return Ok(Box::new(MockBackend::new(b)));
    }
    let path = Path::new(id);
    if path.is_file() {
        return Ok(Box::new(PluginBackend::from_file(path)?));
    }
    Err(BackendError::Unknown(id.to_string()))
}
