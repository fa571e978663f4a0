use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numeric::Matrix;
use crate::{Error, Result};

/// Observation IDs paired with their latent vectors; the artifact peers share.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    vectors: Matrix,
    source_tag: String,
}

impl EmbeddingTable {
    pub fn new(ids: Vec<String>, vectors: Matrix, source_tag: impl Into<String>) -> Result<Self> {
        if ids.len() != vectors.rows() {
            return Err(Error::shape(
                "EmbeddingTable::new",
                format!("{} ids", ids.len()),
                format!("vectors {}", vectors.shape_str()),
            ));
        }
        if !vectors.is_finite() {
            return Err(Error::Data("embedding contains non-finite values".into()));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Data(format!(
                "duplicate id '{dup}' in embedding table"
            )));
        }
        Ok(Self {
            ids,
            vectors,
            source_tag: source_tag.into(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// CSV with header `id,m0,…,m{M−1}`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("id");
        for j in 0..self.dim() {
            let _ = write!(out, ",m{j}");
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(self.vectors.iter_rows()) {
            out.push_str(id);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinMode {
    /// Both tables must carry exactly the same IDs.
    #[default]
    Strict,
    /// Keep the IDs present on both sides.
    Inner,
}

/// Row-aligned concatenation `[a | b]` of two embedding tables.
#[derive(Clone, Debug, PartialEq)]
pub struct Joined {
    pub ids: Vec<String>,
    pub features: Matrix,
}

/// Aligns `b` to `a` by ID. Rows follow `a`'s order; peer-A columns come first.
pub fn join_embeddings(a: &EmbeddingTable, b: &EmbeddingTable, mode: JoinMode) -> Result<Joined> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot join an empty embedding table".into(),
        ));
    }
    let b_index: HashMap<&str, usize> = b
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if mode == JoinMode::Strict {
        let a_ids: HashSet<&str> = a.ids.iter().map(String::as_str).collect();
        let missing_in_b = a
            .ids
            .iter()
            .filter(|id| !b_index.contains_key(id.as_str()))
            .count();
        let missing_in_a = b
            .ids
            .iter()
            .filter(|id| !a_ids.contains(id.as_str()))
            .count();
        if missing_in_a + missing_in_b > 0 {
            return Err(Error::Data(format!(
                "strict join: ID sets differ ({missing_in_b} missing in b, {missing_in_a} missing in a)"
            )));
        }
    }
    let mut ids = Vec::with_capacity(a.len());
    let mut a_rows = Vec::with_capacity(a.len());
    let mut b_rows = Vec::with_capacity(a.len());
    for (i, id) in a.ids.iter().enumerate() {
        if let Some(&j) = b_index.get(id.as_str()) {
            ids.push(id.clone());
            a_rows.push(i);
            b_rows.push(j);
        }
    }
    let features = a
        .vectors
        .select_rows(&a_rows)
        .hstack(&b.vectors.select_rows(&b_rows))?;
    Ok(Joined { ids, features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(ids: &[&str], m: usize, offset: f64) -> EmbeddingTable {
        let n = ids.len();
        let x = Matrix::from_vec(n, m, (0..n * m).map(|v| v as f64 + offset).collect()).unwrap();
        EmbeddingTable::new(ids.iter().map(|s| s.to_string()).collect(), x, "t").unwrap()
    }

    #[test]
    fn strict_shape() {
        let j = join_embeddings(
            &table(&["1", "2", "3"], 4, 0.0),
            &table(&["3", "1", "2"], 3, 100.0),
            JoinMode::Strict,
        )
        .unwrap();
        assert_eq!(j.features.shape(), (3, 7));
        assert_eq!(j.ids, vec!["1", "2", "3"]);
        // id "1" is row 1 of b
        assert_eq!(&j.features.row(0)[4..], &[103.0, 104.0, 105.0]);
    }

    #[test]
    fn strict_reports_missing_counts() {
        let err = join_embeddings(
            &table(&["1", "2", "3"], 2, 0.0),
            &table(&["2", "3", "4"], 2, 0.0),
            JoinMode::Strict,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("1 missing in b, 1 missing in a"), "{err}");
    }

    #[test]
    fn inner_keeps_intersection_in_a_order() {
        let j = join_embeddings(
            &table(&["1", "2", "3"], 2, 0.0),
            &table(&["4", "3", "2"], 1, 10.0),
            JoinMode::Inner,
        )
        .unwrap();
        assert_eq!(j.ids, vec!["2", "3"]);
        assert_eq!(j.features.row(0), &[2.0, 3.0, 12.0]);
        assert_eq!(j.features.row(1), &[4.0, 5.0, 11.0]);
    }

    #[test]
    fn table_validation() {
        assert!(
            EmbeddingTable::new(vec!["a".into(), "a".into()], Matrix::zeros(2, 1), "").is_err()
        );
        let nan = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(EmbeddingTable::new(vec!["a".into()], nan, "").is_err());
        assert!(
            join_embeddings(&table(&[], 1, 0.0), &table(&["1"], 1, 0.0), JoinMode::Inner).is_err()
        );
    }

    #[test]
    fn csv_layout() {
        let csv = table(&["x"], 2, 0.5).to_csv_string();
        assert_eq!(csv, "id,m0,m1\nx,0.5,1.5\n");
    }
}
