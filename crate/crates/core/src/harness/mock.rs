use std::collections::BTreeSet;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendAnswer, BackendDescriptor, BackendError, BackendRequest, Capability, CaptureBundle};
use crate::intervention::capture::{CaptureKind, CaptureLayer, CaptureSidecar};
use crate::intervention::{
    apply_intervention, overlap_ratio, renormalize, InterventionPlan, ModelFamily, ObjectTokens, PatchGrid, StrategyName,
    VisualSpan,
};
use crate::rng;
use crate::scene::SceneManifest;

pub const UNPARSABLE_ANSWER: &str = "I see many objects.";

/// Geometry of the synthetic captures.
pub const MOCK_PATCH: u32 = 64;
pub const MOCK_HEADS: usize = 2;
pub const MOCK_TEXT_TOKENS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    Oracle,
    Biased,
    Constant,
    Unparsable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockBehavior {
    pub kind: MockKind,
    #[serde(default = "one")]
    pub bias_factor: f64,
    #[serde(default)]
    pub constant_value: u64,
}

fn one() -> f64 {
    1.0
}

impl MockBehavior {
    pub fn oracle() -> Self {
        Self { kind: MockKind::Oracle, bias_factor: 1.0, constant_value: 0 }
    }

    pub fn biased(bias_factor: f64) -> Self {
        Self { kind: MockKind::Biased, bias_factor, constant_value: 0 }
    }

    pub fn constant(value: u64) -> Self {
        Self { kind: MockKind::Constant, bias_factor: 1.0, constant_value: value }
    }

    pub fn unparsable() -> Self {
        Self { kind: MockKind::Unparsable, bias_factor: 1.0, constant_value: 0 }
    }

    /// `mock-oracle`, `mock-biased:<f>`, `mock-constant:<n>` or `mock-unparsable`.
    pub fn parse_id(id: &str) -> Option<Self> {
        let rest = id.strip_prefix("mock-")?;
        let (kind, arg) = rest.split_once(':').map_or((rest, None), |(k, a)| (k, Some(a)));
        let b = match (kind, arg) {
            ("oracle", None) => Self::oracle(),
            ("unparsable", None) => Self::unparsable(),
            ("biased", Some(f)) => Self::biased(f.parse().ok()?),
            ("constant", Some(n)) => Self::constant(n.parse().ok()?),
            _ => return None,
        };
        (b.bias_factor > 0.0 && b.bias_factor.is_finite()).then_some(b)
    }

    pub fn id(&self) -> String {
        match self.kind {
            MockKind::Oracle => "mock-oracle".into(),
            MockKind::Biased => format!("mock-biased:{}", self.bias_factor),
            MockKind::Constant => format!("mock-constant:{}", self.constant_value),
            MockKind::Unparsable => "mock-unparsable".into(),
        }
    }

    pub fn respond(&self, true_count: u32) -> String {
        match self.kind {
            MockKind::Oracle => format!("{{{true_count}}}"),
            MockKind::Biased => format!("{{{}}}", (true_count as f64 * self.bias_factor).round() as u64),
            MockKind::Constant => format!("{{{}}}", self.constant_value),
            MockKind::Unparsable => UNPARSABLE_ANSWER.to_string(),
        }
    }
}

/// Deterministic, stateless stand-in for a model.
///
/// Captures are synthetic: attention leans towards patches covered by objects and
/// gradients are positive on them, so relevance readouts have something to find.
#[derive(Debug, Clone)]
pub struct MockBackend {
    behavior: MockBehavior,
    descriptor: BackendDescriptor,
}

impl MockBackend {
    pub fn new(behavior: MockBehavior) -> Self {
        let capabilities: BTreeSet<Capability> =
            [Capability::Answer, Capability::CaptureAttention, Capability::CaptureGradients, Capability::ApplyPlan].into();
        Self { descriptor: BackendDescriptor { id: behavior.id(), capabilities, model_family: ModelFamily::Mock }, behavior }
    }

    pub fn behavior(&self) -> MockBehavior {
        self.behavior
    }
}

fn unit(seed: u64, a: i64, b: i64) -> f64 {
    (rng::hash2(seed, a, b) >> 11) as f64 / (1u64 << 53) as f64
}

impl Backend for MockBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn answer(&self, req: &BackendRequest<'_>) -> Result<BackendAnswer, BackendError> {
        let raw_text = self.behavior.respond(req.manifest.true_count);
        let captures = if req.capture {
            let plan = req.plan.cloned().unwrap_or_else(|| InterventionPlan::new(StrategyName::Baseline, ModelFamily::Mock));
            Some(mock_captures(req.manifest, &plan, &self.descriptor.id).map_err(|message| BackendError::AdapterFailure {
                backend: self.descriptor.id.clone(),
                message,
            })?)
        } else {
            None
        };
        Ok(BackendAnswer { raw_text, captures })
    }
}

/// Synthetic attention and gradients for every layer of `plan`, with the plan applied.
pub fn mock_captures(manifest: &SceneManifest, plan: &InterventionPlan, backend_id: &str) -> Result<CaptureBundle, String> {
    let grid = PatchGrid::new(MOCK_PATCH, manifest.width, manifest.height).map_err(|e| e.to_string())?;
    let rho = overlap_ratio(&manifest.object_mask, &grid).map_err(|e| e.to_string())?;
    let n_vis = grid.num_patches();
    let span = VisualSpan { start: 1, end: n_vis };
    let seq = 1 + n_vis + MOCK_TEXT_TOKENS;
    let layers = plan.num_layers();
    let visual_rho = |j: usize| if span.contains(j) { rho[j - span.start] } else { 0.0 };

    let raw: Vec<Array3<f64>> = (0..layers)
        .map(|l| {
            Array3::from_shape_fn((MOCK_HEADS, seq, seq), |(h, i, j)| {
                let s = manifest.seed ^ ((l * MOCK_HEADS + h) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                0.05 + unit(s, i as i64, j as i64) + 2.0 * visual_rho(j)
            })
        })
        .collect();
    let attn = raw.into_iter().map(renormalize).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let objects = ObjectTokens::from_overlap(span, &rho, plan.params.tau).map_err(|e| e.to_string())?;
    let out = apply_intervention(&attn, plan, span, Some(&objects)).map_err(|e| e.to_string())?;

    let mut pairs = Vec::with_capacity(layers);
    for (l, a) in out.layers.iter().enumerate() {
        let g = Array3::from_shape_fn((MOCK_HEADS, seq, seq), |(h, i, j)| {
            let s = !manifest.seed ^ ((l * MOCK_HEADS + h) as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
            visual_rho(j) - 0.2 * unit(s, i as i64, j as i64)
        });
        let a = CaptureLayer::from_array(CaptureKind::Attention, l as u32, a.weights()).map_err(|e| e.to_string())?;
        let g = CaptureLayer::from_array(CaptureKind::Gradient, l as u32, &g).map_err(|e| e.to_string())?;
        pairs.push((a, Some(g)));
    }
    let sidecar = CaptureSidecar {
        image_id: manifest.image_id.clone(),
        backend_id: backend_id.to_string(),
        plan: Some(plan.clone()),
        seq_len: seq,
        visual_span: span,
        patch_grid: grid,
        supervised_positions: vec![seq - 2, seq - 1],
        layers: Vec::new(),
    };
    Ok(CaptureBundle { sidecar, layers: pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn responses() {
        assert_eq!(MockBehavior::oracle().respond(17), "{17}");
        assert_eq!(MockBehavior::biased(0.8).respond(50), "{40}");
        assert_eq!(MockBehavior::constant(7).respond(50), "{7}");
        assert_eq!(MockBehavior::unparsable().respond(3), "I see many objects.");
    }

    #[test]
    fn ids_round_trip() {
        for b in [MockBehavior::oracle(), MockBehavior::biased(0.8), MockBehavior::constant(3), MockBehavior::unparsable()] {
            assert_eq!(MockBehavior::parse_id(&b.id()), Some(b));
        }
        assert_eq!(MockBehavior::parse_id("mock-biased:0"), None);
        assert_eq!(MockBehavior::parse_id("mock-biased"), None);
        assert_eq!(MockBehavior::parse_id("oracle"), None);
    }
}
