use ndarray::{Array4, Axis, Zip};

use super::InterventionError;

/// Query heads per key-value head.
pub fn group_factor(num_heads: usize, num_kv_heads: usize) -> Result<usize, InterventionError> {
    if num_kv_heads == 0 || num_heads % num_kv_heads != 0 {
        return Err(InterventionError::ShapeMismatch(format!(
            "{num_heads} query heads cannot be grouped over {num_kv_heads} key-value heads"
        )));
    }
    Ok(num_heads / num_kv_heads)
}

/// Repeats each key-value head `group_factor` times: `B×K×L×d` to `B×(K·G)×L×d`.
///
/// Output head `h` is input head `h / G`.
pub fn expand_kv_heads<T: Clone>(values: &Array4<T>, group_factor: usize) -> Result<Array4<T>, InterventionError> {
    if group_factor == 0 {
        return Err(InterventionError::ShapeMismatch("group factor must be positive".into()));
    }
    let (b, k, l, d) = values.dim();
    let h = k
        .checked_mul(group_factor)
        .ok_or_else(|| InterventionError::ShapeMismatch("head count overflows".into()))?;
    let wide = values
        .view()
        .insert_axis(Axis(2))
        .broadcast((b, k, group_factor, l, d))
        .ok_or_else(|| InterventionError::ShapeMismatch("broadcast failed".into()))?
        .to_owned();
    wide.into_shape_with_order((b, h, l, d)).map_err(|e| InterventionError::ShapeMismatch(e.to_string()))
}

/// `O = A V` per batch and head: `attn` is `B×H×Q×K`, `values` is `B×H×K×d` (already expanded).
pub fn attention_output(attn: &Array4<f64>, values: &Array4<f64>) -> Result<Array4<f64>, InterventionError> {
    let (b, h, q, k) = attn.dim();
    let (vb, vh, vk, d) = values.dim();
    if (b, h, k) != (vb, vh, vk) {
        return Err(InterventionError::ShapeMismatch(format!(
            "attention {:?} does not match values {:?}",
            attn.dim(),
            values.dim()
        )));
    }
    let mut out = Array4::<f64>::zeros((b, h, q, d));
    Zip::from(out.outer_iter_mut())
        .and(attn.outer_iter())
        .and(values.outer_iter())
        .for_each(|mut o, a, v| {
            for ((mut oh, ah), vh) in o.outer_iter_mut().zip(a.outer_iter()).zip(v.outer_iter()) {
                oh.assign(&ah.dot(&vh));
            }
        });
    Ok(out)
}
