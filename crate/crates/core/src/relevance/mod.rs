//! Gradient-weighted relevance propagated across decoder layers.
//!
//! Per layer, attention is weighted by the positive part of its gradient and averaged
//! over heads. Adding the identity and normalizing rows gives a transition matrix;
//! the product over the last `k` layers relates output tokens to input positions.

mod iou;

pub use iou::{attention_iou, binarize_relevance, relevance_overlay, LocalizationRecord, LocalizationScore};

use ndarray::{Array2, Array3, Axis, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervention::capture::CapturePair;

/// Compose depth used when none is given.
pub const DEFAULT_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelevanceError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("compose depth {depth} is outside 1..={layers}")]
    BadDepth { depth: usize, layers: usize },
    #[error("relevance map has negative or non-finite entries")]
    InvalidMap,
    #[error("token {token} is outside a {len}-token sequence")]
    TokenOutOfRange { token: usize, len: usize },
    #[error("no target tokens were selected")]
    NoTargets,
    #[error("mask is {actual:?} but the patch grid expects {expected:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("invalid capture: {0}")]
    InvalidCapture(String),
}

/// One decoder layer's attention `A` and gradient `dL/dA`, both `H×S×S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCapture {
    pub layer: usize,
    pub attention: Array3<f64>,
    pub gradient: Array3<f64>,
}

impl LayerCapture {
    pub fn new(layer: usize, attention: Array3<f64>, gradient: Array3<f64>) -> Result<Self, RelevanceError> {
        let (_, q, k) = attention.dim();
        if attention.dim() != gradient.dim() || q != k {
            return Err(RelevanceError::ShapeMismatch(format!(
                "attention {:?} and gradient {:?} must be equal H×S×S",
                attention.dim(),
                gradient.dim()
            )));
        }
        if attention.iter().chain(gradient.iter()).any(|v| !v.is_finite()) || attention.iter().any(|v| *v < 0.0) {
            return Err(RelevanceError::InvalidCapture(format!("layer {layer} has negative or non-finite values")));
        }
        for row in attention.lanes(Axis(2)) {
            if (row.sum() - 1.0).abs() > 1e-5 {
                return Err(RelevanceError::InvalidCapture(format!("layer {layer} attention rows are not stochastic")));
            }
        }
        Ok(Self { layer, attention, gradient })
    }

    /// From a decoded capture pair; a missing gradient is treated as all zeros.
    pub fn from_pair((a, g): &CapturePair) -> Result<Self, RelevanceError> {
        let attention = a.to_array();
        let gradient = match g {
            Some(g) => g.to_array(),
            None => Array3::zeros(attention.dim()),
        };
        Self::new(a.layer as usize, attention, gradient)
    }

    pub fn seq_len(&self) -> usize {
        self.attention.dim().2
    }
}

/// `(1/H) Σ_h A_h ⊙ max(G_h, 0)`.
pub fn gradient_weighted_map(attention: &Array3<f64>, gradient: &Array3<f64>) -> Result<Array2<f64>, RelevanceError> {
    if attention.dim() != gradient.dim() {
        return Err(RelevanceError::ShapeMismatch(format!("{:?} vs {:?}", attention.dim(), gradient.dim())));
    }
    let (h, q, k) = attention.dim();
    let mut out = Array2::<f64>::zeros((q, k));
    if h == 0 {
        return Ok(out);
    }
    for (a, g) in attention.outer_iter().zip(gradient.outer_iter()) {
        Zip::from(&mut out).and(&a).and(&g).for_each(|o, a, g| *o += a * g.max(0.0));
    }
    out.mapv_inplace(|v| v / h as f64);
    Ok(out)
}

/// Adds the identity and normalizes rows.
pub fn transition_matrix(map: &Array2<f64>) -> Result<Array2<f64>, RelevanceError> {
    let (q, k) = map.dim();
    if q != k {
        return Err(RelevanceError::ShapeMismatch(format!("relevance map {q}x{k} is not square")));
    }
    if map.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(RelevanceError::InvalidMap);
    }
    let mut m = map.clone();
    for i in 0..q {
        m[[i, i]] += 1.0;
    }
    for mut row in m.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    Ok(m)
}

/// Product of the last `depth` transitions in layer order.
pub fn compose(transitions: &[Array2<f64>], depth: usize) -> Result<Array2<f64>, RelevanceError> {
    if depth == 0 || depth > transitions.len() {
        return Err(RelevanceError::BadDepth { depth, layers: transitions.len() });
    }
    let tail = &transitions[transitions.len() - depth..];
    let dim = tail[0].dim();
    if let Some(bad) = tail.iter().find(|m| m.dim() != dim || dim.0 != dim.1) {
        return Err(RelevanceError::ShapeMismatch(format!("transition {:?} vs {:?}", bad.dim(), dim)));
    }
    Ok(tail[1..].iter().fold(tail[0].clone(), |acc, m| acc.dot(m)))
}

/// Row `t` of `c`, or the renormalized mean of several rows.
pub fn token_relevance(c: &Array2<f64>, targets: &[usize]) -> Result<Vec<f64>, RelevanceError> {
    if targets.is_empty() {
        return Err(RelevanceError::NoTargets);
    }
    let len = c.nrows();
    if let Some(&token) = targets.iter().find(|t| **t >= len) {
        return Err(RelevanceError::TokenOutOfRange { token, len });
    }
    let mut acc = vec![0.0; c.ncols()];
    for &t in targets {
        for (a, v) in acc.iter_mut().zip(c.row(t)) {
            *a += v;
        }
    }
    let s: f64 = acc.iter().sum();
    if s > 0.0 {
        acc.iter_mut().for_each(|v| *v /= s);
    }
    Ok(acc)
}

/// Composed relevance and the readout for the selected tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMap {
    pub depth: usize,
    pub targets: Vec<usize>,
    /// `S×S`, row-major.
    pub composed: Vec<Vec<f64>>,
    pub relevance: Vec<f64>,
}

/// Full pipeline over captures given in layer order.
pub fn propagate(captures: &[LayerCapture], depth: usize, targets: &[usize]) -> Result<RelevanceMap, RelevanceError> {
    let transitions = captures
        .iter()
        .map(|c| transition_matrix(&gradient_weighted_map(&c.attention, &c.gradient)?))
        .collect::<Result<Vec<_>, _>>()?;
    let c = compose(&transitions, depth)?;
    let relevance = token_relevance(&c, targets)?;
    Ok(RelevanceMap {
        depth,
        targets: targets.to_vec(),
        composed: c.rows().into_iter().map(|r| r.to_vec()).collect(),
        relevance,
    })
}
