use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LearnerSpec, LogisticParams};
use crate::metrics;
use crate::numeric::{Matrix, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ParamRange {
    LogUniform {
        low: f64,
        high: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Inclusive on both ends.
    IntUniform {
        low: usize,
        high: usize,
    },
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            ParamRange::LogUniform { low, high } => low > 0.0 && low <= high && high.is_finite(),
            ParamRange::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            ParamRange::IntUniform { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid range for {name}: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            ParamRange::LogUniform { low, high } => rng.uniform(low.ln(), high.ln()).exp(),
            ParamRange::Uniform { low, high } => rng.uniform(low, high),
            ParamRange::IntUniform { low, high } => (low + rng.below(high - low + 1)) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Ridge {
        l2: ParamRange,
    },
    Logistic {
        learning_rate: ParamRange,
        l2: ParamRange,
        epochs: ParamRange,
        batch_size: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub space: SpaceKind,
    pub n_samples: usize,
    pub n_folds: usize,
    pub seed: u64,
}

impl SearchSpace {
    pub fn ridge(seed: u64) -> Self {
        SearchSpace {
            space: SpaceKind::Ridge {
                l2: ParamRange::LogUniform {
                    low: 1e-6,
                    high: 1e3,
                },
            },
            n_samples: 20,
            n_folds: 3,
            seed,
        }
    }

    pub fn logistic(seed: u64) -> Self {
        SearchSpace {
            space: SpaceKind::Logistic {
                learning_rate: ParamRange::LogUniform {
                    low: 1e-4,
                    high: 1e-1,
                },
                l2: ParamRange::LogUniform {
                    low: 1e-6,
                    high: 1e-1,
                },
                epochs: ParamRange::IntUniform { low: 50, high: 200 },
                batch_size: 128,
            },
            n_samples: 20,
            n_folds: 3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if self.n_folds < 2 {
            return Err(Error::InvalidArgument("n_folds must be >= 2".into()));
        }
        match &self.space {
            SpaceKind::Ridge { l2 } => l2.validate("l2"),
            SpaceKind::Logistic {
                learning_rate,
                l2,
                epochs,
                batch_size,
            } => {
                learning_rate.validate("learning_rate")?;
                l2.validate("l2")?;
                epochs.validate("epochs")?;
                if matches!(epochs, ParamRange::IntUniform { low: 0, .. }) || *batch_size == 0 {
                    return Err(Error::InvalidArgument(
                        "epochs and batch_size must be >= 1".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The candidate sequence; fixed by `seed`.
    pub fn candidates(&self) -> Vec<LearnerSpec> {
        let mut rng = Rng::derive(self.seed, 0);
        (0..self.n_samples)
            .map(|_| match &self.space {
                SpaceKind::Ridge { l2 } => LearnerSpec::ridge(l2.sample(&mut rng)),
                SpaceKind::Logistic {
                    learning_rate,
                    l2,
                    epochs,
                    batch_size,
                } => LearnerSpec::Logistic(LogisticParams {
                    learning_rate: learning_rate.sample(&mut rng),
                    l2: l2.sample(&mut rng),
                    epochs: epochs.sample(&mut rng).round().max(1.0) as usize,
                    batch_size: *batch_size,
                    seed: self.seed,
                }),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R2,
    Mape,
    Accuracy,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Mape)
    }

    pub fn score(self, y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
        match self {
            Metric::R2 => metrics::r2(y_true, y_pred),
            Metric::Mape => Ok(metrics::mape(y_true, y_pred)?.value),
            Metric::Accuracy => {
                if y_true.len() != y_pred.len() || y_true.is_empty() {
                    return Err(Error::shape("accuracy", y_true.len(), y_pred.len()));
                }
                let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
                Ok(100.0 * hits as f64 / y_true.len() as f64)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub candidate: usize,
    pub spec: LearnerSpec,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub metric: Metric,
    pub rows: Vec<CvRow>,
}

impl CvTable {
    pub fn to_csv_string(&self) -> String {
        let folds = self.rows.first().map_or(0, |r| r.fold_scores.len());
        let mut out = String::from("candidate,kind,learning_rate,l2,epochs,batch_size");
        for f in 0..folds {
            let _ = write!(out, ",fold_{f}");
        }
        out.push_str(",mean\n");
        for row in &self.rows {
            let (lr, l2, epochs, batch) = match &row.spec {
                LearnerSpec::Ridge { l2, .. } => {
                    (String::new(), l2.to_string(), String::new(), String::new())
                }
                LearnerSpec::Logistic(p) => (
                    p.learning_rate.to_string(),
                    p.l2.to_string(),
                    p.epochs.to_string(),
                    p.batch_size.to_string(),
                ),
            };
            let _ = write!(
                out,
                "{},{},{lr},{l2},{epochs},{batch}",
                row.candidate,
                row.spec.kind_name()
            );
            for s in &row.fold_scores {
                let _ = write!(out, ",{s}");
            }
            let _ = writeln!(out, ",{}", row.mean);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: LearnerSpec,
    pub best_index: usize,
    pub table: CvTable,
}

/// Seeded plain (unstratified) k-fold assignment: each entry holds the
/// validation rows of one fold.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::InvalidArgument(format!(
            "cannot build {k} non-empty folds from {n} rows"
        )));
    }
    let perm = Rng::derive(seed, 1).permutation(n);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut fold = perm[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Evaluates every sampled candidate with k-fold CV and picks the best mean
/// score; ties go to the earliest candidate.
pub fn random_search_cv(
    x: &Matrix,
    y: &[f64],
    space: &SearchSpace,
    metric: Metric,
) -> Result<SearchOutcome> {
    space.validate()?;
    if x.rows() != y.len() {
        return Err(Error::shape(
            "random_search_cv",
            x.shape_str(),
            format!("{} targets", y.len()),
        ));
    }
    let folds = fold_indices(x.rows(), space.n_folds, space.seed)?;
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = folds
        .iter()
        .enumerate()
        .map(|(f, val)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            (train, val)
        })
        .collect();

    let mut rows = Vec::with_capacity(space.n_samples);
    for (candidate, spec) in space.candidates().into_iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(splits.len());
        for (train, val) in &splits {
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let y_val: Vec<f64> = val.iter().map(|&i| y[i]).collect();
            let model = spec.fit(&x.select_rows(train), &y_train)?;
            let pred = model.predict(&x.select_rows(val))?.values();
            fold_scores.push(metric.score(&y_val, &pred)?);
        }
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        rows.push(CvRow {
            candidate,
            spec,
            fold_scores,
            mean,
        });
    }

    let mut best_index = 0;
    for (i, row) in rows.iter().enumerate() {
        let better = if metric.higher_is_better() {
            row.mean > rows[best_index].mean
        } else {
            row.mean < rows[best_index].mean
        };
        if better {
            best_index = i;
        }
    }
    Ok(SearchOutcome {
        best: rows[best_index].spec.clone(),
        best_index,
        table: CvTable { metric, rows },
    })
}
