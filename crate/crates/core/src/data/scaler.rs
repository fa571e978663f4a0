use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::numeric::Matrix;
use crate::{Error, Result};

/// Per-feature min/max fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(features: &Matrix, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "scaler needs at least one training row".into(),
            ));
        }
        let d = features.cols();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for &r in rows {
            for (c, &v) in features.row(r).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::shape(
                "scaler",
                format!("{} fitted features", self.dim()),
                format!("input {}", x.shape_str()),
            ));
        }
        Ok(())
    }

    /// `(x − min)/(max − min)`; constant features map to 0; no clipping.
    pub fn transform_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        let d = self.dim();
        for row in out.as_mut_slice().chunks_exact_mut(d) {
            for (c, v) in row.iter_mut().enumerate() {
                let span = self.max[c] - self.min[c];
                *v = if span > 0.0 {
                    (*v - self.min[c]) / span
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    /// Inverse of [`transform_matrix`](Self::transform_matrix); constant features
    /// come back as their fitted value.
    pub fn inverse_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        let d = self.dim();
        for row in out.as_mut_slice().chunks_exact_mut(d) {
            for (c, v) in row.iter_mut().enumerate() {
                let span = self.max[c] - self.min[c];
                *v = if span > 0.0 {
                    *v * span + self.min[c]
                } else {
                    self.min[c]
                };
            }
        }
        Ok(out)
    }
}

pub fn fit_scaler(ds: &Dataset, train_idx: &[usize]) -> Result<ScalerParams> {
    ScalerParams::fit(ds.features(), train_idx)
}

pub fn transform(ds: &Dataset, scaler: &ScalerParams) -> Result<Dataset> {
    ds.with_features(
        ds.feature_names().to_vec(),
        scaler.transform_matrix(ds.features())?,
    )
}

pub fn inverse_transform(ds: &Dataset, scaler: &ScalerParams) -> Result<Dataset> {
    ds.with_features(
        ds.feature_names().to_vec(),
        scaler.inverse_matrix(ds.features())?,
    )
}
