use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use super::InterventionError;

/// Tolerance on row sums accepted when wrapping existing weights.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Post-softmax attention of one layer: heads × queries × keys, every row summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    weights: Array3<f64>,
}

impl AttentionTensor {
    /// Wraps weights that are already non-negative and row-stochastic.
    pub fn new(weights: Array3<f64>) -> Result<Self, InterventionError> {
        check_non_negative(&weights)?;
        for ((h, q), row) in rows(&weights) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(InterventionError::InvalidWeights(format!("row ({h}, {q}) sums to {s}")));
            }
        }
        Ok(Self { weights })
    }

    pub fn from_shape_vec(heads: usize, queries: usize, keys: usize, data: Vec<f64>) -> Result<Self, InterventionError> {
        let w = Array3::from_shape_vec((heads, queries, keys), data)
            .map_err(|e| InterventionError::ShapeMismatch(e.to_string()))?;
        Self::new(w)
    }

    pub fn weights(&self) -> &Array3<f64> {
        &self.weights
    }

    pub fn into_weights(self) -> Array3<f64> {
        self.weights
    }

    pub fn heads(&self) -> usize {
        self.weights.dim().0
    }

    pub fn queries(&self) -> usize {
        self.weights.dim().1
    }

    pub fn keys(&self) -> usize {
        self.weights.dim().2
    }

    /// Fraction of each row's mass on `span`, indexed `[head][query]`.
    pub fn visual_ratio(&self, span: VisualSpan) -> Array2Ratio {
        let (h, q, _) = self.weights.dim();
        let mut out = vec![vec![0.0; q]; h];
        for ((hi, qi), row) in rows(&self.weights) {
            let total: f64 = row.iter().sum();
            let vis: f64 = row.iter().skip(span.start).take(span.len()).sum();
            out[hi][qi] = vis / total;
        }
        out
    }
}

pub type Array2Ratio = Vec<Vec<f64>>;

pub(crate) fn rows(w: &Array3<f64>) -> impl Iterator<Item = ((usize, usize), ndarray::ArrayView1<'_, f64>)> {
    let q = w.dim().1;
    w.lanes(Axis(2)).into_iter().enumerate().map(move |(i, lane)| ((i / q.max(1), i % q.max(1)), lane))
}

fn check_non_negative(w: &Array3<f64>) -> Result<(), InterventionError> {
    if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(InterventionError::InvalidWeights(format!("entry {v} is negative or not finite")));
    }
    Ok(())
}

/// Divides every row by its sum.
pub fn renormalize(mut weights: Array3<f64>) -> Result<AttentionTensor, InterventionError> {
    check_non_negative(&weights)?;
    let q = weights.dim().1;
    for (i, mut row) in weights.lanes_mut(Axis(2)).into_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(InterventionError::DegenerateRow { head: i / q.max(1), query: i % q.max(1) });
        }
        row.mapv_inplace(|v| v / s);
    }
    Ok(AttentionTensor { weights })
}

/// Inclusive range of key indices holding visual tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualSpan {
    pub start: usize,
    pub end: usize,
}

impl VisualSpan {
    pub fn new(start: usize, end: usize) -> Result<Self, InterventionError> {
        if start > end {
            return Err(InterventionError::InvalidSpan { start, end, keys: None });
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: usize) -> bool {
        j >= self.start && j <= self.end
    }

    pub fn check(&self, keys: usize) -> Result<(), InterventionError> {
        if self.start > self.end || self.end >= keys {
            return Err(InterventionError::InvalidSpan { start: self.start, end: self.end, keys: Some(keys) });
        }
        Ok(())
    }
}
