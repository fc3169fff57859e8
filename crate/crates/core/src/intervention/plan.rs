use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::{apply_strategy, ObjectTokens, StrategyConfig, StrategyKind};
use super::{AttentionTensor, InterventionError, VisualSpan};

/// The named layer schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Baseline,
    UniformAmplify,
    UniformSuppress,
    UniformFocus,
    UniformBalance,
    ProgressiveVisualFade,
    ProgressiveVisualGrow,
    EarlyVisualOnly,
    MiddleVisualBoost,
    LateVisualRetention,
    ExtremeVisualEarly,
    ExtremeTextLate,
    AlternatingAmpSup,
    EarlyAmplifyVisualMask,
    MiddleAmplifyVisualMask,
    LateAmplifyVisualMask,
    EarlyAmplifyVisualMaskBgSuppress,
    MiddleAmplifyVisualMaskBgSuppress,
    LateAmplifyVisualMaskBgSuppress,
}

impl StrategyName {
    pub const ALL: [StrategyName; 19] = [
        StrategyName::Baseline,
        StrategyName::UniformAmplify,
        StrategyName::UniformSuppress,
        StrategyName::UniformFocus,
        StrategyName::UniformBalance,
        StrategyName::ProgressiveVisualFade,
        StrategyName::ProgressiveVisualGrow,
        StrategyName::EarlyVisualOnly,
        StrategyName::MiddleVisualBoost,
        StrategyName::LateVisualRetention,
        StrategyName::ExtremeVisualEarly,
        StrategyName::ExtremeTextLate,
        StrategyName::AlternatingAmpSup,
        StrategyName::EarlyAmplifyVisualMask,
        StrategyName::MiddleAmplifyVisualMask,
        StrategyName::LateAmplifyVisualMask,
        StrategyName::EarlyAmplifyVisualMaskBgSuppress,
        StrategyName::MiddleAmplifyVisualMaskBgSuppress,
        StrategyName::LateAmplifyVisualMaskBgSuppress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyName::Baseline => "baseline",
            StrategyName::UniformAmplify => "uniform_amplify",
            StrategyName::UniformSuppress => "uniform_suppress",
            StrategyName::UniformFocus => "uniform_focus",
            StrategyName::UniformBalance => "uniform_balance",
            StrategyName::ProgressiveVisualFade => "progressive_visual_fade",
            StrategyName::ProgressiveVisualGrow => "progressive_visual_grow",
            StrategyName::EarlyVisualOnly => "early_visual_only",
            StrategyName::MiddleVisualBoost => "middle_visual_boost",
            StrategyName::LateVisualRetention => "late_visual_retention",
            StrategyName::ExtremeVisualEarly => "extreme_visual_early",
            StrategyName::ExtremeTextLate => "extreme_text_late",
            StrategyName::AlternatingAmpSup => "alternating_amp_sup",
            StrategyName::EarlyAmplifyVisualMask => "early_amplify_visual_mask",
            StrategyName::MiddleAmplifyVisualMask => "middle_amplify_visual_mask",
            StrategyName::LateAmplifyVisualMask => "late_amplify_visual_mask",
            StrategyName::EarlyAmplifyVisualMaskBgSuppress => "early_amplify_visual_mask_bg_suppress",
            StrategyName::MiddleAmplifyVisualMaskBgSuppress => "middle_amplify_visual_mask_bg_suppress",
            StrategyName::LateAmplifyVisualMaskBgSuppress => "late_amplify_visual_mask_bg_suppress",
        }
    }

    /// True for the object-mask schedules, which need object tokens at run time.
    pub fn needs_mask(self) -> bool {
        matches!(
            self,
            StrategyName::EarlyAmplifyVisualMask
                | StrategyName::MiddleAmplifyVisualMask
                | StrategyName::LateAmplifyVisualMask
                | StrategyName::EarlyAmplifyVisualMaskBgSuppress
                | StrategyName::MiddleAmplifyVisualMaskBgSuppress
                | StrategyName::LateAmplifyVisualMaskBgSuppress
        )
    }

    /// Operator for `layer`, plus whether background tokens keep weight 1.
    fn rule(self, groups: &LayerGroups, layer: usize) -> (StrategyKind, bool) {
        use Group::*;
        use StrategyKind as K;
        let g = groups.group_of(layer);
        let n = groups.num_layers;
        let extreme = n * 3 / 8;
        let in_group = |want: Group| if g == want { K::MaskAmplify } else { K::None };
        let kind = match self {
            StrategyName::Baseline => K::None,
            StrategyName::UniformAmplify => K::Amplify,
            StrategyName::UniformSuppress => K::Suppress,
            StrategyName::UniformFocus => K::Focus,
            StrategyName::UniformBalance => K::Balance,
            StrategyName::ProgressiveVisualFade => [K::Amplify, K::Balance, K::Suppress][g as usize],
            StrategyName::ProgressiveVisualGrow => [K::Suppress, K::Balance, K::Amplify][g as usize],
            StrategyName::EarlyVisualOnly => [K::Focus, K::Suppress, K::Suppress][g as usize],
            StrategyName::MiddleVisualBoost => [K::Balance, K::Amplify, K::Balance][g as usize],
            StrategyName::LateVisualRetention => [K::Balance, K::Balance, K::Amplify][g as usize],
            StrategyName::ExtremeVisualEarly if layer < extreme => K::Focus,
            StrategyName::ExtremeVisualEarly => K::Balance,
            StrategyName::ExtremeTextLate if layer >= n - extreme => K::Suppress,
            StrategyName::ExtremeTextLate => K::Balance,
            StrategyName::AlternatingAmpSup if layer % 2 == 0 => K::Amplify,
            StrategyName::AlternatingAmpSup => K::Suppress,
            StrategyName::EarlyAmplifyVisualMask | StrategyName::EarlyAmplifyVisualMaskBgSuppress => in_group(Early),
            StrategyName::MiddleAmplifyVisualMask | StrategyName::MiddleAmplifyVisualMaskBgSuppress => in_group(Middle),
            StrategyName::LateAmplifyVisualMask | StrategyName::LateAmplifyVisualMaskBgSuppress => in_group(Late),
        };
        let keep_bg = matches!(
            self,
            StrategyName::EarlyAmplifyVisualMask | StrategyName::MiddleAmplifyVisualMask | StrategyName::LateAmplifyVisualMask
        );
        (kind, keep_bg)
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyName {
    type Err = InterventionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| InterventionError::InvalidParameter(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    Early = 0,
    Middle = 1,
    Late = 2,
}

/// Decoder geometry, selecting the default layer groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Qwen25,
    Qwen3,
    Kimi,
    Internvl,
    Mock,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Qwen25 => "qwen25",
            ModelFamily::Qwen3 => "qwen3",
            ModelFamily::Kimi => "kimi",
            ModelFamily::Internvl => "internvl",
            ModelFamily::Mock => "mock",
        }
    }

    pub fn groups(self) -> LayerGroups {
        let g = |n, a, b| LayerGroups { num_layers: n, early: [0, a], middle: [a, b], late: [b, n] };
        match self {
            ModelFamily::Qwen25 | ModelFamily::Qwen3 => g(32, 8, 24),
            ModelFamily::Kimi => g(27, 9, 18),
            ModelFamily::Internvl => g(48, 16, 32),
            ModelFamily::Mock => g(4, 1, 3),
        }
    }
}

impl FromStr for ModelFamily {
    type Err = InterventionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [ModelFamily::Qwen25, ModelFamily::Qwen3, ModelFamily::Kimi, ModelFamily::Internvl, ModelFamily::Mock]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| InterventionError::InvalidParameter(format!("unknown model family {s:?}")))
    }
}

/// Early/middle/late as half-open `[start, end)` layer ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGroups {
    pub num_layers: usize,
    pub early: [usize; 2],
    pub middle: [usize; 2],
    pub late: [usize; 2],
}

impl LayerGroups {
    /// Checks the three ranges are non-empty and tile `[0, num_layers)` in order.
    pub fn validate(&self) -> Result<(), InterventionError> {
        let ok = self.early[0] == 0
            && self.early[1] == self.middle[0]
            && self.middle[1] == self.late[0]
            && self.late[1] == self.num_layers
            && [self.early, self.middle, self.late].iter().all(|[a, b]| a < b);
        if ok {
            Ok(())
        } else {
            Err(InterventionError::InvalidGroups(format!("{self:?}")))
        }
    }

    fn group_of(&self, layer: usize) -> Group {
        if layer < self.early[1] {
            Group::Early
        } else if layer < self.middle[1] {
            Group::Middle
        } else {
            Group::Late
        }
    }
}

/// Which forward passes an adapter should apply the plan to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Decode,
    Prefill,
    Both,
}

/// A named schedule bound to a layer geometry.
///
/// `params` supplies the operator constants for every layer; `overrides` replaces the
/// whole configuration of individual layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr")]
pub struct InterventionPlan {
    pub name: StrategyName,
    pub model_family: ModelFamily,
    pub groups: LayerGroups,
    pub overrides: BTreeMap<usize, StrategyConfig>,
    pub params: StrategyConfig,
    pub phase: Phase,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRepr {
    name: StrategyName,
    model_family: ModelFamily,
    #[serde(default)]
    groups: Option<LayerGroups>,
    #[serde(default)]
    overrides: BTreeMap<usize, StrategyConfig>,
    #[serde(default)]
    params: StrategyConfig,
    #[serde(default)]
    phase: Phase,
}

impl TryFrom<PlanRepr> for InterventionPlan {
    type Error = InterventionError;

    fn try_from(r: PlanRepr) -> Result<Self, Self::Error> {
        let plan = InterventionPlan {
            name: r.name,
            model_family: r.model_family,
            groups: r.groups.unwrap_or_else(|| r.model_family.groups()),
            overrides: r.overrides,
            params: r.params,
            phase: r.phase,
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl InterventionPlan {
    pub fn new(name: StrategyName, model_family: ModelFamily) -> Self {
        Self {
            name,
            model_family,
            groups: model_family.groups(),
            overrides: BTreeMap::new(),
            params: StrategyConfig::default(),
            phase: Phase::Decode,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn num_layers(&self) -> usize {
        self.groups.num_layers
    }

    pub fn validate(&self) -> Result<(), InterventionError> {
        self.groups.validate()?;
        self.params.validate()?;
        for (&layer, cfg) in &self.overrides {
            if layer >= self.num_layers() {
                return Err(InterventionError::LayerOutOfRange { layer, num_layers: self.num_layers() });
            }
            cfg.validate()?;
        }
        Ok(())
    }

    /// Configuration applied at `layer`.
    pub fn lookup(&self, layer: usize) -> Result<StrategyConfig, InterventionError> {
        if layer >= self.num_layers() {
            return Err(InterventionError::LayerOutOfRange { layer, num_layers: self.num_layers() });
        }
        if let Some(cfg) = self.overrides.get(&layer) {
            return Ok(*cfg);
        }
        let (kind, keep_bg) = self.name.rule(&self.groups, layer);
        let mut cfg = self.params.with_kind(kind);
        if keep_bg {
            cfg.alpha_bg = 1.0;
        }
        Ok(cfg)
    }

    /// One configuration per layer.
    pub fn layer_map(&self) -> Vec<StrategyConfig> {
        (0..self.num_layers()).map(|l| self.lookup(l).expect("layer in range")).collect()
    }

    pub fn needs_mask(&self) -> bool {
        self.layer_map().iter().any(|c| c.kind == StrategyKind::MaskAmplify)
    }
}

/// Same as [`InterventionPlan::lookup`].
pub fn plan_lookup(plan: &InterventionPlan, layer: usize) -> Result<StrategyConfig, InterventionError> {
    plan.lookup(layer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionOutcome {
    pub layers: Vec<AttentionTensor>,
    /// Rows left untouched by balance because they had no visual (or no text) mass.
    pub passthrough_rows: usize,
}

/// Applies each layer's configuration to the matching attention tensor.
pub fn apply_intervention(
    layers: &[AttentionTensor],
    plan: &InterventionPlan,
    span: VisualSpan,
    objects: Option<&ObjectTokens>,
) -> Result<InterventionOutcome, InterventionError> {
    if layers.len() != plan.num_layers() {
        return Err(InterventionError::LayerCountMismatch { expected: plan.num_layers(), actual: layers.len() });
    }
    let map = plan.layer_map();
    if objects.is_none() {
        if let Some(layer) = map.iter().position(|c| c.kind == StrategyKind::MaskAmplify) {
            return Err(InterventionError::MissingMask { layer });
        }
    }
    let out: Vec<(AttentionTensor, usize)> = layers
        .par_iter()
        .zip(map.par_iter())
        .map(|(a, cfg)| apply_strategy(a, cfg, span, objects))
        .collect::<Result<_, _>>()?;
    let passthrough_rows = out.iter().map(|(_, n)| n).sum();
    Ok(InterventionOutcome { layers: out.into_iter().map(|(a, _)| a).collect(), passthrough_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervention::{renormalize, scale_visual};
    use ndarray::Array3;

    fn kinds(plan: &InterventionPlan) -> Vec<StrategyKind> {
        plan.layer_map().iter().map(|c| c.kind).collect()
    }

    #[test]
    fn table_examples() {
        let grow = InterventionPlan::new(StrategyName::ProgressiveVisualGrow, ModelFamily::Qwen25);
        assert_eq!(grow.lookup(3).unwrap().kind, StrategyKind::Suppress);
        assert_eq!(grow.lookup(8).unwrap().kind, StrategyKind::Balance);
        assert_eq!(grow.lookup(24).unwrap().kind, StrategyKind::Amplify);
        let alt = InterventionPlan::new(StrategyName::AlternatingAmpSup, ModelFamily::Qwen25);
        assert_eq!(alt.lookup(4).unwrap().kind, StrategyKind::Amplify);
        assert_eq!(alt.lookup(5).unwrap().kind, StrategyKind::Suppress);
        let base = InterventionPlan::new(StrategyName::Baseline, ModelFamily::Kimi);
        assert!(kinds(&base).iter().all(|k| *k == StrategyKind::None));
        assert!(base.lookup(27).is_err());
    }

    #[test]
    fn extreme_ranges_on_32_layers() {
        let early = kinds(&InterventionPlan::new(StrategyName::ExtremeVisualEarly, ModelFamily::Qwen3));
        assert!(early[..12].iter().all(|k| *k == StrategyKind::Focus));
        assert!(early[12..].iter().all(|k| *k == StrategyKind::Balance));
        let late = kinds(&InterventionPlan::new(StrategyName::ExtremeTextLate, ModelFamily::Qwen3));
        assert!(late[..20].iter().all(|k| *k == StrategyKind::Balance));
        assert!(late[20..].iter().all(|k| *k == StrategyKind::Suppress));
    }

    #[test]
    fn mask_variants_differ_in_background_weight() {
        let plain = InterventionPlan::new(StrategyName::LateAmplifyVisualMask, ModelFamily::Kimi);
        let bg = InterventionPlan::new(StrategyName::LateAmplifyVisualMaskBgSuppress, ModelFamily::Kimi);
        assert_eq!(plain.lookup(20).unwrap().alpha_bg, 1.0);
        assert_eq!(bg.lookup(20).unwrap().alpha_bg, 0.5);
        assert_eq!(plain.lookup(17).unwrap().kind, StrategyKind::None);
        assert!(plain.needs_mask());
    }

    #[test]
    fn groups_tile_layers() {
        for fam in [ModelFamily::Qwen25, ModelFamily::Qwen3, ModelFamily::Kimi, ModelFamily::Internvl, ModelFamily::Mock] {
            fam.groups().validate().unwrap();
        }
        let bad = LayerGroups { num_layers: 32, early: [0, 8], middle: [8, 25], late: [24, 32] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let mut plan = InterventionPlan::new(StrategyName::UniformBalance, ModelFamily::Kimi);
        plan.overrides.insert(3, StrategyConfig::default().with_kind(StrategyKind::Focus));
        let text = serde_json::to_string(&plan).unwrap();
        assert_eq!(InterventionPlan::from_json(&text).unwrap(), plan);
        let short = InterventionPlan::from_json(r#"{"name":"uniform_balance","model_family":"kimi"}"#).unwrap();
        assert_eq!(short.groups, ModelFamily::Kimi.groups());
        assert_eq!(short.phase, Phase::Decode);
    }

    #[test]
    fn json_rejects_bad_plans() {
        assert!(InterventionPlan::from_json(r#"{"name":"uniform_zoom","model_family":"kimi"}"#).is_err());
        assert!(InterventionPlan::from_json(r#"{"name":"baseline","model_family":"kimi","overrides":{"27":{}}}"#).is_err());
        assert!(InterventionPlan::from_json(r#"{"name":"baseline","model_family":"kimi","params":{"alpha":0.5}}"#).is_err());
    }

    fn layers(n: usize) -> Vec<AttentionTensor> {
        (0..n)
            .map(|l| {
                let data = (0..2 * 3 * 5).map(|i| ((i * 7 + l * 3) % 11 + 1) as f64).collect();
                renormalize(Array3::from_shape_vec((2, 3, 5), data).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn apply_matches_parts() {
        let span = VisualSpan::new(0, 2).unwrap();
        let mut plan = InterventionPlan::new(StrategyName::UniformAmplify, ModelFamily::Mock);
        plan.groups = LayerGroups { num_layers: 3, early: [0, 1], middle: [1, 2], late: [2, 3] };
        let ls = layers(3);
        let out = apply_intervention(&ls, &plan, span, None).unwrap();
        for (a, b) in ls.iter().zip(&out.layers) {
            assert_eq!(&scale_visual(a, span, 2.0).unwrap(), b);
        }
        plan.name = StrategyName::Baseline;
        assert_eq!(apply_intervention(&ls, &plan, span, None).unwrap().layers, ls);
    }

    #[test]
    fn apply_kimi_early_mask() {
        let span = VisualSpan::new(0, 2).unwrap();
        let plan = InterventionPlan::new(StrategyName::EarlyAmplifyVisualMask, ModelFamily::Kimi);
        let ls = layers(27);
        assert_eq!(apply_intervention(&ls, &plan, span, None), Err(InterventionError::MissingMask { layer: 0 }));
        let objs = ObjectTokens::new(span, vec![1]).unwrap();
        let out = apply_intervention(&ls, &plan, span, Some(&objs)).unwrap();
        for (l, (a, b)) in ls.iter().zip(&out.layers).enumerate() {
            assert_eq!(a == b, l >= 9, "layer {l}");
        }
        assert!(matches!(
            apply_intervention(&ls[..5], &plan, span, Some(&objs)),
            Err(InterventionError::LayerCountMismatch { expected: 27, actual: 5 })
        ));
    }
}
