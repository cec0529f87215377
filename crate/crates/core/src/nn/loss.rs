use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy `-(1/m) Σ_i Σ_j y_ij log p_ij`. Terms with `y_ij = 0`
/// are skipped so an exact one-hot prediction has loss 0.
pub fn cross_entropy(predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    if predictions.rows() != targets.rows() || predictions.cols() != targets.cols() {
        return Err(Error::Shape(format!(
            "predictions {}x{} vs targets {}x{}",
            predictions.rows(),
            predictions.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    let mut total = 0.0;
    for (p, y) in predictions.as_slice().iter().zip(targets.as_slice()) {
        if *y != 0.0 {
            total -= y * p.ln();
        }
    }
    Ok(total / predictions.rows().max(1) as f64)
}

/// Stable log-softmax cross-entropy straight from logits.
pub(crate) fn cross_entropy_from_logits(logits: &Matrix, targets: &Matrix) -> f64 {
    let mut total = 0.0;
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (z, y) in row.iter().zip(targets.row(r)) {
            if *y != 0.0 {
                total -= y * (z - max - log_sum);
            }
        }
    }
    total / logits.rows().max(1) as f64
}

pub fn one_hot(labels: &[u8], classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        let l = l as usize;
        if l >= classes {
            return Err(Error::Input(format!("label {l} out of range for {classes} classes")));
        }
        m.set(r, l, 1.0);
    }
    Ok(m)
}

pub(crate) fn check_one_hot(targets: &Matrix) -> Result<()> {
    for r in 0..targets.rows() {
        let row = targets.row(r);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Input(format!("target row {r} is not one-hot")));
        }
    }
    Ok(())
}

/// Fraction of rows whose arg-max (first index on ties) equals the label.
pub fn accuracy(predictions: &Matrix, labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|(r, &l)| argmax(predictions.row(*r)) == l as usize)
        .count();
    correct as f64 / labels.len() as f64
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_prediction_has_zero_loss() {
        let y = one_hot(&[2, 0], 3).unwrap();
        assert_eq!(cross_entropy(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn uniform_prediction_costs_ln_c() {
        let p = Matrix::from_vec(1, 10, vec![0.1; 10]).unwrap();
        let y = one_hot(&[4], 10).unwrap();
        let loss = cross_entropy(&p, &y).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        let logits = Matrix::zeros(1, 10);
        assert!((cross_entropy_from_logits(&logits, &y) - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let z = Matrix::from_vec(1, 3, vec![1000.0, 999.0, -1000.0]).unwrap();
        let p = softmax_rows(&z);
        assert!(p.is_finite());
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_one_hot() {
        let t = Matrix::from_vec(1, 3, vec![0.5, 0.5, 0.0]).unwrap();
        assert!(check_one_hot(&t).is_err());
        let t = Matrix::from_vec(1, 3, vec![1.0, 1.0, 0.0]).unwrap();
        assert!(check_one_hot(&t).is_err());
        assert!(one_hot(&[10], 10).is_err());
    }

    #[test]
    fn accuracy_uses_first_max() {
        let p = Matrix::from_vec(2, 2, vec![0.5, 0.5, 0.2, 0.8]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1]), 1.0);
        assert_eq!(accuracy(&p, &[1, 0]), 0.0);
    }
}
