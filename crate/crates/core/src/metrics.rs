//! Evaluation quantities: R², MAPE, macro precision/recall and the
//! reconstruction diagnostics computed on scaled data.
//!
//! Percentages are reported on a 0–100 scale; R² is a plain fraction.

use serde::{Deserialize, Serialize};

use crate::numeric::Matrix;
use crate::{Error, Result};

/// Cells with `|truth|` below this are excluded from percentage errors.
pub const APE_EXCLUSION: f64 = 1e-8;

/// Reconstruction counts as correct below this absolute percentage error.
pub const CORRECT_APE_THRESHOLD: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub mape: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// `confusion[truth][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub representation_error: f64,
    pub correct_rate: f64,
    /// `None` for features whose every truth cell was excluded.
    pub per_feature_mape: Vec<Option<f64>>,
    pub excluded_cell_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mape {
    pub value: f64,
    pub excluded: usize,
}

fn check_lengths(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(
            op,
            format!("{a} truths"),
            format!("{b} predictions"),
        ));
    }
    Ok(())
}

/// `1 − SS_res/SS_tot`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths("r2", y_true.len(), y_pred.len())?;
    if y_true.len() < 2 {
        return Err(Error::InvalidArgument(
            "r2 needs at least two observations".into(),
        ));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument(
            "r2 is undefined for a constant target".into(),
        ));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean of `100·|y − ŷ|/|y|` over entries with `|y| ≥ 1e-8`.
pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<Mape> {
    check_lengths("mape", y_true.len(), y_pred.len())?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (y, p) in y_true.iter().zip(y_pred) {
        if y.abs() >= APE_EXCLUSION {
            sum += 100.0 * (y - p).abs() / y.abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "mape: every truth value is (near) zero".into(),
        ));
    }
    Ok(Mape {
        value: sum / used as f64,
        excluded: y_true.len() - used,
    })
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    Ok(RegressionMetrics {
        r2: r2(y_true, y_pred)?,
        mape: mape(y_true, y_pred)?.value,
    })
}

/// Accuracy plus macro-averaged precision and recall over all `k` classes;
/// a 0/0 per-class term counts as 0.
pub fn classification_metrics(
    labels_true: &[usize],
    labels_pred: &[usize],
    k: usize,
) -> Result<ClassificationMetrics> {
    check_lengths(
        "classification_metrics",
        labels_true.len(),
        labels_pred.len(),
    )?;
    if labels_true.is_empty() || k == 0 {
        return Err(Error::InvalidArgument(
            "classification metrics need labels and k >= 1".into(),
        ));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {k} classes",
                t.max(p)
            )));
        }
        confusion[t][p] += 1;
    }
    let n = labels_true.len() as f64;
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let mut precision = 0.0;
    let mut recall = 0.0;
    for c in 0..k {
        let predicted: usize = (0..k).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        precision += ratio(confusion[c][c], predicted);
        recall += ratio(confusion[c][c], actual);
    }
    Ok(ClassificationMetrics {
        accuracy: 100.0 * trace as f64 / n,
        precision: 100.0 * precision / k as f64,
        recall: 100.0 * recall / k as f64,
        confusion,
    })
}

/// Per-cell APE diagnostics between scaled inputs and their reconstruction.
pub fn reconstruction_report(
    x_true: &Matrix,
    x_hat: &Matrix,
    threshold: f64,
) -> Result<ReconstructionReport> {
    if x_true.shape() != x_hat.shape() {
        return Err(Error::shape(
            "reconstruction_report",
            x_true.shape_str(),
            x_hat.shape_str(),
        ));
    }
    let (n, d) = x_true.shape();
    let mut ape_sum = 0.0;
    let mut included = 0usize;
    let mut per_feature = Vec::with_capacity(d);
    let mut rate_sum = 0.0;
    let mut rated = 0usize;
    for c in 0..d {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut correct = 0usize;
        for r in 0..n {
            let t = x_true.get(r, c);
            if t.abs() < APE_EXCLUSION {
                continue;
            }
            let ape = 100.0 * (x_hat.get(r, c) - t).abs() / t.abs();
            sum += ape;
            count += 1;
            if ape < threshold {
                correct += 1;
            }
        }
        ape_sum += sum;
        included += count;
        if count > 0 {
            per_feature.push(Some(sum / count as f64));
            rate_sum += correct as f64 / count as f64;
            rated += 1;
        } else {
            per_feature.push(None);
        }
    }
    if included == 0 {
        return Err(Error::InvalidArgument(
            "reconstruction report: every cell is (near) zero".into(),
        ));
    }
    Ok(ReconstructionReport {
        representation_error: ape_sum / included as f64,
        correct_rate: 100.0 * rate_sum / rated as f64,
        per_feature_mape: per_feature,
        excluded_cell_count: n * d - included,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;
    use proptest::prelude::*;

    #[test]
    fn r2_cases() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(r2(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() < 0.0);
        assert!(r2(&[4.0, 4.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mape_cases() {
        assert!((mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap().value - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap().value, 0.0);
        let m = mape(&[0.0, 100.0], &[5.0, 100.0]).unwrap();
        assert_eq!((m.value, m.excluded), (0.0, 1));
        assert!(mape(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn classification_cases() {
        let all = classification_metrics(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(
            (all.accuracy, all.precision, all.recall),
            (100.0, 100.0, 100.0)
        );

        let m = classification_metrics(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(m.accuracy, 75.0);
        assert!((m.precision - 100.0 * (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((m.precision - 83.333333333).abs() < 1e-6);
        assert_eq!(m.recall, 75.0);
        assert_eq!(m.confusion, vec![vec![1, 1], vec![0, 2]]);

        // class 2 never predicted: its precision term is 0
        let g = classification_metrics(&[0, 1, 2], &[0, 1, 1], 3).unwrap();
        assert!((g.precision - 100.0 * (1.0 + 0.5 + 0.0) / 3.0).abs() < 1e-12);
        assert!(classification_metrics(&[0, 3], &[0, 0], 3).is_err());
    }

    #[test]
    fn reconstruction_cases() {
        let x = Matrix::from_rows(&[[0.5, 0.2], [0.4, 0.8]]).unwrap();
        let perfect = reconstruction_report(&x, &x, 5.0).unwrap();
        assert_eq!(
            (perfect.representation_error, perfect.correct_rate),
            (0.0, 100.0)
        );

        let mut off = x.clone();
        off.set(0, 0, 0.55);
        let r = reconstruction_report(&x, &off, 5.0).unwrap();
        assert!((r.representation_error - 2.5).abs() < 1e-12);
        assert!((r.correct_rate - 75.0).abs() < 1e-12);

        let z = Matrix::from_rows(&[[0.0, 0.5], [0.0, 0.4]]).unwrap();
        let r = reconstruction_report(&z, &z.map(|v| v * 1.01), 5.0).unwrap();
        assert_eq!(r.excluded_cell_count, 2);
        assert_eq!(r.per_feature_mape[0], None);
        assert_eq!(r.correct_rate, 100.0);
        assert!(reconstruction_report(&x, &Matrix::zeros(2, 3), 5.0).is_err());
    }

    #[test]
    fn r2_of_mean_prediction_is_zero() {
        let y = [3.0, 7.5, -1.0, 4.25];
        let mean = y.iter().sum::<f64>() / 4.0;
        assert_eq!(r2(&y, &[mean; 4]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_joint_permutation(
            y in prop::collection::vec(1.0f64..100.0, 12),
            noise in prop::collection::vec(-5.0f64..5.0, 12),
            labels in prop::collection::vec(0usize..3, 12),
            shift in prop::collection::vec(0usize..3, 12),
            seed in any::<u64>(),
        ) {
            let p: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let pred: Vec<usize> = labels.iter().zip(&shift).map(|(a, b)| (a + b) % 3).collect();
            let perm = Rng::new(seed).permutation(12);
            let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
            let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let pl: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
            let pq: Vec<usize> = perm.iter().map(|&i| pred[i]).collect();
            prop_assert!((r2(&y, &p).unwrap() - r2(&py, &pp).unwrap()).abs() < 1e-12);
            prop_assert!((mape(&y, &p).unwrap().value - mape(&py, &pp).unwrap().value).abs() < 1e-12);
            prop_assert_eq!(classification_metrics(&labels, &pred, 3).unwrap(), classification_metrics(&pl, &pq, 3).unwrap());
        }

        #[test]
        fn self_reconstruction_is_perfect(values in prop::collection::vec(0.0f64..1.0, 20)) {
            let mut x = Matrix::from_vec(5, 4, values).unwrap();
            x.set(0, 0, 0.5);
            let r = reconstruction_report(&x, &x, 5.0).unwrap();
            prop_assert_eq!(r.representation_error, 0.0);
            prop_assert_eq!(r.correct_rate, 100.0);
        }

        #[test]
        fn balanced_accuracy_equals_macro_recall(pred in prop::collection::vec(0usize..3, 12)) {
            let truth: Vec<usize> = (0..12).map(|i| i % 3).collect();
            let m = classification_metrics(&truth, &pred, 3).unwrap();
            prop_assert!((m.accuracy - m.recall).abs() < 1e-9);
        }
    }
}
