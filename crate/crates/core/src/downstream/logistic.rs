use serde::{Deserialize, Serialize};

use super::check_width;
use crate::numeric::{softmax_crossentropy, softmax_rows, AdamConfig, AdamState, Matrix, Rng};
use crate::{Error, Result};

/// Multinomial logistic regression trained by minibatch Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 1e-3,
            l2: 1e-4,
            epochs: 100,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "logistic l2 must be >= 0, got {}",
                self.l2
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `d × K`
    pub weights: Matrix,
    pub biases: Vec<f64>,
    /// Original label of each output column, ascending.
    pub classes: Vec<usize>,
    /// Mean training objective per epoch.
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    fn logits(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.weights.rows(), x)?;
        let mut z = x.matmul(&self.weights)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        Ok(z)
    }

    /// `n × K` class probabilities; columns follow `classes`.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.logits(x)?))
    }

    pub fn labels_from_proba(&self, p: &Matrix) -> Vec<usize> {
        p.iter_rows()
            .map(|row| {
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                self.classes[best]
            })
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.labels_from_proba(&self.predict_proba(x)?))
    }
}

pub fn fit_logistic(
    x: &Matrix,
    labels: &[usize],
    params: &LogisticParams,
) -> Result<LogisticModel> {
    params.validate()?;
    let (n, d) = x.shape();
    if n != labels.len() {
        return Err(Error::shape(
            "fit_logistic",
            x.shape_str(),
            format!("{} labels", labels.len()),
        ));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Data(format!(
            "logistic regression needs at least 2 classes in the training labels, found {}",
            classes.len()
        )));
    }
    let k = classes.len();
    let index: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label drawn from classes"))
        .collect();

    let mut model = LogisticModel {
        weights: Matrix::zeros(d, k),
        biases: vec![0.0; k],
        classes,
        loss_history: Vec::with_capacity(params.epochs),
    };
    let mut adam = AdamState::new(
        AdamConfig::with_learning_rate(params.learning_rate),
        &[d * k, k],
    );
    let mut rng = Rng::new(params.seed);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..params.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (b, batch) in order.chunks(params.batch_size).enumerate() {
            let xb = x.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| index[i]).collect();
            let logits = model.logits(&xb)?;
            let (ce, dz) = softmax_crossentropy(&logits, &yb)?;
            let penalty =
                0.5 * params.l2 * model.weights.as_slice().iter().map(|w| w * w).sum::<f64>();
            let loss = ce + penalty;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            total += loss * batch.len() as f64;

            let mut gw = xb.t_matmul(&dz)?;
            for (g, w) in gw.as_mut_slice().iter_mut().zip(model.weights.as_slice()) {
                *g += params.l2 * w;
            }
            let gb = dz.col_sums();
            adam.update(
                &mut [model.weights.as_mut_slice(), model.biases.as_mut_slice()],
                &[gw.as_slice(), gb.as_slice()],
            )?;
        }
        model.loss_history.push(total / n as f64);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(11);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let cx = if c == 0 { -2.0 } else { 2.0 };
            // keep a gap of 2 between the classes along x
            let jitter = rng.uniform(-1.0, 1.0) * 0.9;
            rows.push([cx + jitter, rng.uniform(-1.0, 1.0)]);
            labels.push(c * 3);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    fn params() -> LogisticParams {
        LogisticParams {
            learning_rate: 0.05,
            l2: 0.0,
            epochs: 100,
            batch_size: 8,
            seed: 5,
        }
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs();
        let m = fit_logistic(&x, &y, &params()).unwrap();
        assert_eq!(m.classes, vec![0, 3]);
        assert_eq!(m.predict(&x).unwrap(), y);
        assert!(m.loss_history.last().unwrap() < &m.loss_history[0]);
    }

    #[test]
    fn probabilities_and_argmax() {
        let (x, y) = blobs();
        let m = fit_logistic(&x, &y, &params()).unwrap();
        let p = m.predict_proba(&x).unwrap();
        for row in p.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let labels = m.labels_from_proba(&p);
        for (row, l) in p.iter_rows().zip(&labels) {
            let arg = if row[0] >= row[1] { 0 } else { 3 };
            assert_eq!(*l, arg);
        }
    }

    #[test]
    fn same_seed_same_coefficients() {
        let (x, y) = blobs();
        let a = fit_logistic(&x, &y, &params()).unwrap();
        let b = fit_logistic(&x, &y, &params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::zeros(3, 2);
        let err = fit_logistic(&x, &[1, 1, 1], &params()).unwrap_err();
        assert!(err.to_string().contains("at least 2 classes"));
    }
}
