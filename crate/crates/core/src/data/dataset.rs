use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numeric::{Matrix, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Observations keyed by ID with named real-valued feature columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    feature_names: Vec<String>,
    features: Matrix,
    target: Option<Vec<f64>>,
    target_name: Option<String>,
    task: Task,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        feature_names: Vec<String>,
        features: Matrix,
        target: Option<(String, Vec<f64>)>,
        task: Task,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::Data(
                "dataset needs at least one feature column".into(),
            ));
        }
        if feature_names.len() != features.cols() || ids.len() != features.rows() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} ids x {} names", ids.len(), feature_names.len()),
                format!("features {}", features.shape_str()),
            ));
        }
        if let Some((_, y)) = &target {
            if y.len() != ids.len() {
                return Err(Error::shape(
                    "Dataset::new",
                    format!("{} ids", ids.len()),
                    format!("{} targets", y.len()),
                ));
            }
            if task == Task::Classification {
                if let Some(bad) = y.iter().find(|v| !(v.fract() == 0.0 && **v >= 0.0)) {
                    return Err(Error::Data(format!(
                        "class label {bad} is not a non-negative integer"
                    )));
                }
            }
        }
        let mut seen = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if let Some(first) = seen.insert(id.as_str(), row) {
                return Err(Error::Data(format!(
                    "duplicate id '{id}' (rows {} and {})",
                    first + 1,
                    row + 1
                )));
            }
        }
        let (target_name, target) = match target {
            Some((name, y)) => (Some(name), Some(y)),
            None => (None, None),
        };
        Ok(Self {
            ids,
            feature_names,
            features,
            target,
            target_name,
            task,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target_name.as_deref()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Same IDs and target, new feature block.
    pub fn with_features(&self, feature_names: Vec<String>, features: Matrix) -> Result<Self> {
        Self::new(
            self.ids.clone(),
            feature_names,
            features,
            self.target_pair(),
            self.task,
        )
    }

    fn target_pair(&self) -> Option<(String, Vec<f64>)> {
        self.target
            .as_ref()
            .map(|y| (self.target_name.clone().unwrap_or_default(), y.clone()))
    }

    pub fn subset_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(idx),
            target: self
                .target
                .as_ref()
                .map(|y| idx.iter().map(|&i| y[i]).collect()),
            target_name: self.target_name.clone(),
            task: self.task,
        }
    }

    pub fn select_features(&self, names: &[String]) -> Result<Dataset> {
        let lookup: HashMap<&str, usize> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let idx = names
            .iter()
            .map(|n| {
                lookup
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("feature column '{n}' not found")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_features(names.to_vec(), self.features.select_cols(&idx))
    }

    /// Seeded subsample of `rows` observations, original row order kept.
    pub fn subsample(&self, rows: usize, seed: u64) -> Result<Dataset> {
        if rows == 0 || rows > self.n() {
            return Err(Error::InvalidArgument(format!(
                "cannot subsample {rows} rows from {}",
                self.n()
            )));
        }
        let mut idx = Rng::new(seed).permutation(self.n());
        idx.truncate(rows);
        idx.sort_unstable();
        Ok(self.subset_rows(&idx))
    }

    /// Class indices of a classification target.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        if self.task != Task::Classification {
            return Err(Error::InvalidArgument(
                "class labels requested for a regression dataset".into(),
            ));
        }
        let y = self
            .target
            .as_ref()
            .ok_or_else(|| Error::Data("dataset has no target column".into()))?;
        Ok(y.iter().map(|&v| v as usize).collect())
    }

    /// `max label + 1` for classification targets.
    pub fn n_classes(&self) -> Result<usize> {
        Ok(self.class_labels()?.into_iter().max().map_or(0, |m| m + 1))
    }

    /// Header `id_column,[target,]features...`; floats printed in shortest
    /// round-trip form.
    pub fn to_csv_string(&self, id_column: &str) -> String {
        let mut out = String::new();
        out.push_str(id_column);
        if let Some(name) = &self.target_name {
            if self.target.is_some() {
                out.push(',');
                out.push_str(name);
            }
        }
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (r, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            if let Some(y) = &self.target {
                let _ = write!(out, ",{}", y[r]);
            }
            for v in self.features.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, id_column: &str) -> Result<()> {
        std::fs::write(path, self.to_csv_string(id_column))?;
        Ok(())
    }
}

/// Reads a header-first, comma-separated file. Every column other than the
/// ID and target columns becomes a real-valued feature.
pub fn load_csv(
    path: impl AsRef<Path>,
    id_column: &str,
    target_column: Option<&str>,
    task: Task,
) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str, what: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(format!("{what} column '{name}' not found")))
    };
    let id_idx = find(id_column, "id")?;
    let target_idx = target_column.map(|t| find(t, "target")).transpose()?;
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| i != id_idx && Some(i) != target_idx)
        .collect();
    if feature_idx.is_empty() {
        return Err(csv_err("no feature columns".into()));
    }

    let mut ids = Vec::new();
    let mut target = Vec::new();
    let mut data = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while reader
        .read_record(&mut record)
        .map_err(|e| csv_err(e.to_string()))?
    {
        row += 1;
        let parse = |col: usize| -> Result<f64> {
            let cell = &record[col];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(csv_err(format!(
                    "row {row}, column '{}': cannot parse '{cell}' as a number",
                    header[col]
                ))),
            }
        };
        ids.push(record[id_idx].to_owned());
        if let Some(t) = target_idx {
            target.push(parse(t)?);
        }
        for &c in &feature_idx {
            data.push(parse(c)?);
        }
    }
    let features = Matrix::from_vec(ids.len(), feature_idx.len(), data)?;
    let feature_names = feature_idx.iter().map(|&i| header[i].clone()).collect();
    let target = target_column.map(|name| (name.to_owned(), target));
    Dataset::new(ids, feature_names, features, target, task).map_err(|e| match e {
        Error::Data(msg) => csv_err(msg),
        other => other,
    })
}
