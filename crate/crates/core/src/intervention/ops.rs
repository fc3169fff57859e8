use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::patches::object_token_set;
use super::{renormalize, AttentionTensor, InterventionError, VisualSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    Amplify,
    Suppress,
    Focus,
    Balance,
    MaskAmplify,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Amplify => "amplify",
            StrategyKind::Suppress => "suppress",
            StrategyKind::Focus => "focus",
            StrategyKind::Balance => "balance",
            StrategyKind::MaskAmplify => "mask_amplify",
        }
    }
}

/// How the balance scale factor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// `γ = r_target / r_current`; after renormalization the ratio lands at
    /// `r_target / (r_target + 1 - r_current)`, not at `r_target`.
    #[default]
    PaperLiteral,
    /// Solves for the `γ` that makes the renormalized ratio equal `r_target`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub target_ratio: f64,
    pub alpha_obj: f64,
    pub alpha_bg: f64,
    pub tau: f64,
    pub balance_mode: BalanceMode,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::None,
            alpha: 2.0,
            beta: 0.5,
            epsilon: 1e-10,
            target_ratio: 0.4,
            alpha_obj: 2.0,
            alpha_bg: 0.5,
            tau: 0.1,
            balance_mode: BalanceMode::PaperLiteral,
        }
    }
}

impl StrategyConfig {
    pub fn with_kind(self, kind: StrategyKind) -> Self {
        Self { kind, ..self }
    }

    pub fn validate(&self) -> Result<(), InterventionError> {
        let bad = |what: &str, v: f64| Err(InterventionError::InvalidParameter(format!("{what} = {v}")));
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad("alpha must exceed 1, got alpha", self.alpha);
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1), got beta", self.beta);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive, got epsilon", self.epsilon);
        }
        if !(self.target_ratio > 0.0 && self.target_ratio < 1.0) {
            return bad("target_ratio must lie in (0, 1), got target_ratio", self.target_ratio);
        }
        for (name, v) in [("alpha_obj", self.alpha_obj), ("alpha_bg", self.alpha_bg)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {name}"), v);
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1], got tau", self.tau);
        }
        Ok(())
    }
}

/// Absolute key indices of visual tokens whose patch is mostly object.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectTokens {
    indices: Vec<usize>,
}

impl ObjectTokens {
    /// From absolute key indices; each must fall inside `span`.
    pub fn new(span: VisualSpan, mut indices: Vec<usize>) -> Result<Self, InterventionError> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&j) = indices.iter().find(|&&j| !span.contains(j)) {
            return Err(InterventionError::NotInSpan(j));
        }
        Ok(Self { indices })
    }

    /// From patch indices in row-major grid order, offset by the span start.
    pub fn from_patches(span: VisualSpan, patches: &[usize]) -> Result<Self, InterventionError> {
        Self::new(span, patches.iter().map(|p| span.start.saturating_add(*p)).collect())
    }

    /// Thresholds per-patch overlap ratios with `ρ > τ`.
    pub fn from_overlap(span: VisualSpan, rho: &[f64], tau: f64) -> Result<Self, InterventionError> {
        Self::from_patches(span, &object_token_set(rho, tau))
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn scale_columns(a: &AttentionTensor, factors: &[f64]) -> Result<AttentionTensor, InterventionError> {
    let mut w = a.weights().clone();
    for mut row in w.lanes_mut(Axis(2)) {
        for (v, f) in row.iter_mut().zip(factors) {
            *v *= f;
        }
    }
    renormalize(w)
}

fn check_positive(name: &str, v: f64) -> Result<(), InterventionError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(InterventionError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Multiplies visual columns by `factor` and renormalizes. `factor > 1` amplifies, `< 1` suppresses.
pub fn scale_visual(a: &AttentionTensor, span: VisualSpan, factor: f64) -> Result<AttentionTensor, InterventionError> {
    span.check(a.keys())?;
    check_positive("factor", factor)?;
    let factors: Vec<f64> = (0..a.keys()).map(|j| if span.contains(j) { factor } else { 1.0 }).collect();
    scale_columns(a, &factors)
}

/// Replaces every non-visual entry with `epsilon` and renormalizes.
pub fn focus_visual(a: &AttentionTensor, span: VisualSpan, epsilon: f64) -> Result<AttentionTensor, InterventionError> {
    span.check(a.keys())?;
    check_positive("epsilon", epsilon)?;
    let mut w = a.weights().clone();
    for mut row in w.lanes_mut(Axis(2)) {
        for (j, v) in row.iter_mut().enumerate() {
            if !span.contains(j) {
                *v = epsilon;
            }
        }
    }
    renormalize(w)
}

/// Rescales visual mass towards `target_ratio` row by row.
///
/// Rows with no visual mass (and, in exact mode, rows with no text mass) are left as they
/// are; the second return value counts them.
pub fn balance_visual(
    a: &AttentionTensor,
    span: VisualSpan,
    target_ratio: f64,
    mode: BalanceMode,
) -> Result<(AttentionTensor, usize), InterventionError> {
    span.check(a.keys())?;
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(InterventionError::InvalidParameter(format!("target_ratio must lie in (0, 1), got {target_ratio}")));
    }
    let mut w = a.weights().clone();
    let mut passed = 0;
    for mut row in w.lanes_mut(Axis(2)) {
        let total: f64 = row.iter().sum();
        let vis: f64 = row.iter().skip(span.start).take(span.len()).sum();
        let r = vis / total;
        let gamma = match mode {
            _ if vis <= 0.0 => None,
            BalanceMode::PaperLiteral => Some(target_ratio / r),
            BalanceMode::Exact if r >= 1.0 => None,
            BalanceMode::Exact => Some(target_ratio / (1.0 - target_ratio) * ((1.0 - r) / r)),
        };
        let Some(gamma) = gamma else {
            passed += 1;
            continue;
        };
        for (j, v) in row.iter_mut().enumerate() {
            if span.contains(j) {
                *v *= gamma;
            }
        }
        let s: f64 = row.iter().sum();
        row.mapv_inplace(|v| v / s);
    }
    Ok((AttentionTensor::new(w)?, passed))
}

/// Object columns times `alpha_obj`, remaining visual columns times `alpha_bg`, then renormalize.
pub fn mask_amplify(
    a: &AttentionTensor,
    span: VisualSpan,
    objects: &ObjectTokens,
    alpha_obj: f64,
    alpha_bg: f64,
) -> Result<AttentionTensor, InterventionError> {
    span.check(a.keys())?;
    check_positive("alpha_obj", alpha_obj)?;
    check_positive("alpha_bg", alpha_bg)?;
    if let Some(&j) = objects.indices().iter().find(|&&j| !span.contains(j)) {
        return Err(InterventionError::NotInSpan(j));
    }
    let factors: Vec<f64> = (0..a.keys())
        .map(|j| match (span.contains(j), objects.contains(j)) {
            (true, true) => alpha_obj,
            (true, false) => alpha_bg,
            _ => 1.0,
        })
        .collect();
    scale_columns(a, &factors)
}

/// Dispatches on `config.kind`. Returns the transformed tensor and the balance pass-through tally.
pub fn apply_strategy(
    a: &AttentionTensor,
    config: &StrategyConfig,
    span: VisualSpan,
    objects: Option<&ObjectTokens>,
) -> Result<(AttentionTensor, usize), InterventionError> {
    span.check(a.keys())?;
    let out = match config.kind {
        StrategyKind::None => a.clone(),
        StrategyKind::Amplify => scale_visual(a, span, config.alpha)?,
        StrategyKind::Suppress => scale_visual(a, span, config.beta)?,
        StrategyKind::Focus => focus_visual(a, span, config.epsilon)?,
        StrategyKind::Balance => return balance_visual(a, span, config.target_ratio, config.balance_mode),
        StrategyKind::MaskAmplify => {
            let objects = objects.ok_or(InterventionError::MissingMask { layer: 0 })?;
            mask_amplify(a, span, objects, config.alpha_obj, config.alpha_bg)?
        }
    };
    Ok((out, 0))
}
