//! Attention reweighting on captured or hooked attention arrays.
//!
//! Every operator takes a row-stochastic [`AttentionTensor`], rescales some key columns
//! and renormalizes rows. Plans map each decoder layer to an operator configuration.

pub mod capture;
mod gqa;
mod ops;
mod patches;
mod plan;
mod tensor;

pub use gqa::{attention_output, expand_kv_heads, group_factor};
pub use ops::{
    apply_strategy, balance_visual, focus_visual, mask_amplify, scale_visual, BalanceMode, ObjectTokens, StrategyConfig,
    StrategyKind,
};
pub use patches::{object_token_set, overlap_counts, overlap_ratio, PatchGrid};
pub use plan::{
    apply_intervention, plan_lookup, InterventionOutcome, InterventionPlan, LayerGroups, ModelFamily, Phase, StrategyName,
};
pub use tensor::{renormalize, AttentionTensor, VisualSpan, ROW_SUM_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterventionError {
    #[error("attention row (head {head}, query {query}) has zero mass")]
    DegenerateRow { head: usize, query: usize },
    #[error("invalid attention weights: {0}")]
    InvalidWeights(String),
    #[error("visual span [{start}, {end}] is invalid for {keys:?} keys")]
    InvalidSpan { start: usize, end: usize, keys: Option<usize> },
    #[error("object token {0} lies outside the visual span")]
    NotInSpan(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mask is {actual:?} but the patch grid expects {expected:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer {layer} uses mask_amplify but no object tokens were given")]
    MissingMask { layer: usize },
    #[error("plan covers {expected} layers but {actual} were given")]
    LayerCountMismatch { expected: usize, actual: usize },
    #[error("layer {layer} is outside a {num_layers}-layer model")]
    LayerOutOfRange { layer: usize, num_layers: usize },
    #[error("invalid layer groups: {0}")]
    InvalidGroups(String),
}
