use super::{Matrix, ModelError};

/// Mean absolute error over `mask` and its (sub)gradient with respect to
/// every entry of `pred` (zero outside the mask and at exact ties).
pub fn loss_l1(
    pred: &[f64],
    target: &[f64],
    mask: &[usize],
) -> Result<(f64, Vec<f64>), ModelError> {
    if pred.len() != target.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if mask.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    let n = mask.len() as f64;
    let mut grad = vec![0.0; pred.len()];
    let mut loss = 0.0;
    for &i in mask {
        let r = pred[i] - target[i];
        loss += r.abs();
        grad[i] += if r > 0.0 {
            1.0 / n
        } else if r < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((loss / n, grad))
}

/// Mean softmax cross-entropy over `mask`; gradient is `(softmax − onehot)/n`.
pub fn loss_ce(
    logits: &Matrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, Matrix), ModelError> {
    if labels.len() != logits.rows {
        return Err(ModelError::ShapeMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            logits.rows
        )));
    }
    if mask.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    let n = mask.len() as f64;
    let mut grad = logits.zeros_like();
    let mut loss = 0.0;
    for &i in mask {
        let y = labels[i];
        if y >= logits.cols {
            return Err(ModelError::BadLabel {
                row: i,
                label: y,
                classes: logits.cols,
            });
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
        loss += z.ln() + max - row[y];
        let g = grad.row_mut(i);
        for (c, x) in row.iter().enumerate() {
            g[c] = (x - max).exp() / z / n;
        }
        g[y] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}
