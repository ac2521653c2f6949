use super::HarnessError;

/// Mean absolute error.
pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64, HarnessError> {
    if pred.len() != actual.len() {
        return Err(HarnessError::LengthMismatch(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(HarnessError::Empty);
    }
    Ok(pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(pred: &[T], actual: &[T]) -> Result<f64, HarnessError> {
    if pred.len() != actual.len() {
        return Err(HarnessError::LengthMismatch(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(HarnessError::Empty);
    }
    Ok(pred.iter().zip(actual).filter(|(p, a)| p == a).count() as f64 / pred.len() as f64)
}

/// Mean and population standard deviation; `(NaN, NaN)` for no values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
