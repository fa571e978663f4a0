use super::Matrix;
use crate::{Error, Result};

/// Mean absolute error over all cells and its subgradient (`sign(0) = 0`).
pub fn mae_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mae_loss",
            pred.shape_str(),
            target.shape_str(),
        ));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Err(Error::InvalidArgument("mae_loss on an empty matrix".into()));
    }
    let scale = 1.0 / n as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for ((g, &p), &t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let d = p - t;
        total += d.abs();
        *g = if d > 0.0 {
            scale
        } else if d < 0.0 {
            -scale
        } else {
            0.0
        };
    }
    Ok((total * scale, grad))
}

/// Row-wise softmax, stabilised by subtracting each row's maximum.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    let k = logits.cols();
    if k == 0 {
        return out;
    }
    for row in out.as_mut_slice().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
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

/// Mean negative log-likelihood of `labels` under the row-wise softmax of
/// `logits`, with gradient `(softmax − onehot)/n` w.r.t. the logits.
pub fn softmax_crossentropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape(
            "softmax_crossentropy",
            format!("logits {}", logits.shape_str()),
            format!("{} labels", labels.len()),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "softmax_crossentropy on an empty batch".into(),
        ));
    }
    if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} at row {i} out of range for {k} classes"
        )));
    }
    let mut grad = Matrix::zeros(n, k);
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        total += log_sum - (row[label] - max);
        let g = grad.row_mut(r);
        for (c, (gv, v)) in g.iter_mut().zip(row).enumerate() {
            let p = ((v - max) - log_sum).exp();
            *gv = (p - if c == label { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok((total * inv_n, grad))
}
