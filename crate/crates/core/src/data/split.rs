use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::numeric::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

/// Disjoint train/validation/test row indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Uniformly shuffled partition of `0..n`. Validation and test get
/// `floor(n·fraction)` rows, the remainder goes to train.
pub fn row_split(n: usize, fractions: SplitFractions, seed: u64) -> Result<RowSplit> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "row split needs at least 3 rows, got {n}"
        )));
    }
    let SplitFractions {
        train,
        validation,
        test,
    } = fractions;
    if [train, validation, test]
        .iter()
        .any(|f| !(f.is_finite() && *f > 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be positive: {fractions:?}"
        )));
    }
    if (train + validation + test - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must sum to 1: {fractions:?}"
        )));
    }
    // the epsilon absorbs products like 100·0.15 = 14.999…
    let n_val = (n as f64 * validation + 1e-9).floor() as usize;
    let n_test = (n as f64 * test + 1e-9).floor() as usize;
    let perm = Rng::new(seed).permutation(n);
    let n_train = n - n_val - n_test;
    Ok(RowSplit {
        train: perm[..n_train].to_vec(),
        validation: perm[n_train..n_train + n_val].to_vec(),
        test: perm[n_train + n_val..].to_vec(),
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalSpec {
    /// Share of (shuffled) feature columns given to peer A.
    Fraction(f64),
    Explicit {
        peer_a: Vec<String>,
        peer_b: Vec<String>,
    },
}

/// Feature columns assigned to each of the two peers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalSplit {
    pub peer_a_columns: Vec<String>,
    pub peer_b_columns: Vec<String>,
}

impl VerticalSplit {
    pub fn plan(ds: &Dataset, spec: &VerticalSpec, seed: u64) -> Result<Self> {
        let names = ds.feature_names();
        let d = names.len();
        if d < 2 {
            return Err(Error::InvalidArgument(
                "vertical split needs at least two features".into(),
            ));
        }
        let (peer_a_columns, peer_b_columns) = match spec {
            VerticalSpec::Fraction(f) => {
                if !(f.is_finite() && *f > 0.0 && *f < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "vertical fraction must be in (0, 1), got {f}"
                    )));
                }
                let k = (f * d as f64).round() as usize;
                if k == 0 || k == d {
                    return Err(Error::InvalidArgument(format!(
                        "fraction {f} of {d} features leaves one peer empty"
                    )));
                }
                let perm = Rng::new(seed).permutation(d);
                let mut a = perm[..k].to_vec();
                let mut b = perm[k..].to_vec();
                a.sort_unstable();
                b.sort_unstable();
                (
                    a.into_iter().map(|i| names[i].clone()).collect(),
                    b.into_iter().map(|i| names[i].clone()).collect(),
                )
            }
            VerticalSpec::Explicit { peer_a, peer_b } => {
                if peer_a.is_empty() || peer_b.is_empty() {
                    return Err(Error::InvalidArgument(
                        "vertical split leaves one peer empty".into(),
                    ));
                }
                let a: HashSet<&String> = peer_a.iter().collect();
                let b: HashSet<&String> = peer_b.iter().collect();
                if a.len() != peer_a.len() || b.len() != peer_b.len() {
                    return Err(Error::InvalidArgument(
                        "vertical split lists a column twice".into(),
                    ));
                }
                let mut overlap: Vec<&&String> = a.intersection(&b).collect();
                if !overlap.is_empty() {
                    overlap.sort();
                    return Err(Error::InvalidArgument(format!(
                        "vertical split lists overlap on {overlap:?}"
                    )));
                }
                let all: HashSet<&String> = names.iter().collect();
                if let Some(unknown) = peer_a.iter().chain(peer_b).find(|c| !all.contains(c)) {
                    return Err(Error::InvalidArgument(format!(
                        "unknown feature column '{unknown}'"
                    )));
                }
                if a.len() + b.len() != d {
                    let missing: Vec<&String> = names
                        .iter()
                        .filter(|n| !a.contains(n) && !b.contains(n))
                        .collect();
                    return Err(Error::InvalidArgument(format!(
                        "vertical split does not cover {missing:?}"
                    )));
                }
                (peer_a.clone(), peer_b.clone())
            }
        };
        Ok(Self {
            peer_a_columns,
            peer_b_columns,
        })
    }

    /// Both peers keep every ID and the target.
    pub fn apply(&self, ds: &Dataset) -> Result<(Dataset, Dataset)> {
        Ok((
            ds.select_features(&self.peer_a_columns)?,
            ds.select_features(&self.peer_b_columns)?,
        ))
    }
}

pub fn vertical_split(ds: &Dataset, spec: &VerticalSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    VerticalSplit::plan(ds, spec, seed)?.apply(ds)
}
