//! Downstream learners trained on raw features or joined embeddings, and a
//! randomized cross-validated hyperparameter search over them.

mod logistic;
mod ridge;
mod search;

pub use logistic::{fit_logistic, LogisticModel, LogisticParams};
pub use ridge::{fit_ridge, fit_ridge_with, RidgeModel, RidgeOptions};
pub use search::{
    random_search_cv, CvRow, CvTable, Metric, ParamRange, SearchOutcome, SearchSpace, SpaceKind,
};

use serde::{Deserialize, Serialize};

use crate::numeric::Matrix;
use crate::{Error, Result};

/// A learner and its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ridge {
        l2: f64,
        #[serde(default = "default_true")]
        fit_intercept: bool,
    },
    Logistic(LogisticParams),
}

fn default_true() -> bool {
    true
}

impl LearnerSpec {
    pub fn ridge(l2: f64) -> Self {
        LearnerSpec::Ridge {
            l2,
            fit_intercept: true,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LearnerSpec::Ridge { .. } => "ridge",
            LearnerSpec::Logistic(_) => "logistic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Ridge { l2, .. } => {
                if !(l2.is_finite() && *l2 >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "ridge l2 must be >= 0, got {l2}"
                    )));
                }
                Ok(())
            }
            LearnerSpec::Logistic(p) => p.validate(),
        }
    }

    /// Fits on `x`; for the logistic learner `y` must hold integer labels.
    pub fn fit(&self, x: &Matrix, y: &[f64]) -> Result<FittedModel> {
        self.validate()?;
        match self {
            LearnerSpec::Ridge { l2, fit_intercept } => Ok(FittedModel::Ridge(fit_ridge_with(
                x,
                y,
                RidgeOptions {
                    l2: *l2,
                    fit_intercept: *fit_intercept,
                },
            )?)),
            LearnerSpec::Logistic(p) => {
                Ok(FittedModel::Logistic(fit_logistic(x, &labels_from(y)?, p)?))
            }
        }
    }
}

/// Converts a real-valued target holding class indices to labels.
pub fn labels_from(y: &[f64]) -> Result<Vec<usize>> {
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::Data(format!(
                    "row {i}: class label must be a non-negative integer, got {v}"
                )))
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Ridge(RidgeModel),
    Logistic(LogisticModel),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictions {
    Regression(Vec<f64>),
    Classification {
        labels: Vec<usize>,
        probabilities: Matrix,
    },
}

impl Predictions {
    /// Predictions as reals (class labels converted), for generic scoring.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Predictions::Regression(v) => v.clone(),
            Predictions::Classification { labels, .. } => {
                labels.iter().map(|&l| l as f64).collect()
            }
        }
    }
}

impl FittedModel {
    pub fn input_dim(&self) -> usize {
        match self {
            FittedModel::Ridge(m) => m.weights.len(),
            FittedModel::Logistic(m) => m.weights.rows(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Predictions> {
        match self {
            FittedModel::Ridge(m) => Ok(Predictions::Regression(m.predict(x)?)),
            FittedModel::Logistic(m) => {
                let probabilities = m.predict_proba(x)?;
                let labels = m.labels_from_proba(&probabilities);
                Ok(Predictions::Classification {
                    labels,
                    probabilities,
                })
            }
        }
    }
}

pub(crate) fn check_width(expected: usize, x: &Matrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::shape(
            "predict",
            format!("expected {expected} features"),
            format!("got {}", x.cols()),
        ));
    }
    Ok(())
}
