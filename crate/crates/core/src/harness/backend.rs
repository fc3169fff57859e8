use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervention::capture::{CapturePair, CaptureSidecar};
use crate::intervention::{InterventionPlan, ModelFamily, StrategyName};
use crate::scene::SceneManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Answer,
    CaptureAttention,
    CaptureGradients,
    ApplyPlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    pub capabilities: BTreeSet<Capability>,
    pub model_family: ModelFamily,
}

impl BackendDescriptor {
    pub fn supports(&self, c: Capability) -> bool {
        self.capabilities.contains(&c)
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend {backend} does not support {capability:?}")]
    CapabilityUnsupported { backend: String, capability: Capability },
    #[error("backend {backend} failed: {message}")]
    AdapterFailure { backend: String, message: String },
    #[error("unknown backend {0:?}")]
    Unknown(String),
}

/// One question for a backend.
#[derive(Debug, Clone)]
pub struct BackendRequest<'a> {
    pub manifest: &'a SceneManifest,
    /// Rendered image on disk, when the dataset has been written.
    pub image_path: Option<&'a Path>,
    pub prompt: &'a str,
    pub plan: Option<&'a InterventionPlan>,
    pub capture: bool,
    /// Opaque decoding options forwarded to adapters (greedy when empty).
    pub options: &'a serde_json::Value,
}

/// Layer captures plus their sidecar, ready to write.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureBundle {
    pub sidecar: CaptureSidecar,
    pub layers: Vec<CapturePair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendAnswer {
    pub raw_text: String,
    pub captures: Option<CaptureBundle>,
}

pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    /// Called only after [`backend_answer`] has checked capabilities.
    fn answer(&self, request: &BackendRequest<'_>) -> Result<BackendAnswer, BackendError>;
}

/// Checks capabilities, then asks the backend.
pub fn backend_answer(backend: &dyn Backend, request: &BackendRequest<'_>) -> Result<BackendAnswer, BackendError> {
    let d = backend.descriptor();
    let mut needed = vec![Capability::Answer];
    if request.plan.is_some_and(|p| p.name != StrategyName::Baseline || !p.overrides.is_empty()) {
        needed.push(Capability::ApplyPlan);
    }
    if request.capture {
        needed.push(Capability::CaptureAttention);
    }
    if let Some(&capability) = needed.iter().find(|c| !d.supports(**c)) {
        return Err(BackendError::CapabilityUnsupported { backend: d.id.clone(), capability });
    }
    let mut ans = backend.answer(request)?;
    if !request.capture {
        ans.captures = None;
    }
    Ok(ans)
}
