use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::{DEFAULT_ENCODER_HIDDEN, DEFAULT_LATENT_DIM};
use crate::data::{SplitFractions, Task, VerticalSpec};
use crate::downstream::LearnerSpec;
use crate::numeric::Activation;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub id_column: String,
    pub target_column: String,
    pub task: Task,
    /// Seeded row subsample taken before splitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSpec {
    pub latent_dim: usize,
    pub encoder_hidden: [usize; 3],
    /// Reconstruction layer activation, `relu` or `identity`.
    pub output_activation: Activation,
    /// Task-loss weight for scenarios 3 and 4.
    pub lambda: f64,
}

impl Default for AutoencoderSpec {
    fn default() -> Self {
        AutoencoderSpec {
            latent_dim: DEFAULT_LATENT_DIM,
            encoder_hidden: DEFAULT_ENCODER_HIDDEN,
            output_activation: Activation::Identity,
            lambda: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        TrainingSpec {
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub n_samples: usize,
    pub n_folds: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            n_samples: 20,
            n_folds: 3,
        }
    }
}

/// One scenario run. Either `learner` (fixed hyperparameters) or `search`
/// (randomized CV over the default space for the task) selects the
/// downstream model; with neither, the search runs with defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub name: String,
    pub scenario: u8,
    pub seed: u64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitFractions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertical_split: Option<VerticalSpec>,
    #[serde(default)]
    pub autoencoder: AutoencoderSpec,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSettings>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: ExperimentManifest = serde_json::from_str(text)
            .map_err(|e| Error::Manifest(format!("cannot parse manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    /// Loads a manifest file; relative dataset and output paths are taken
    /// relative to the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
        let mut m = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if m.dataset.path.is_relative() {
            m.dataset.path = base.join(&m.dataset.path);
        }
        if m.output_dir.is_relative() {
            m.output_dir = base.join(&m.output_dir);
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Manifest(msg));
        if self.scenario > 4 {
            return bad(format!("scenario must be 0..=4, got {}", self.scenario));
        }
        if matches!(self.scenario, 2 | 4) && self.vertical_split.is_none() {
            return bad(format!("scenario {} needs a vertical_split", self.scenario));
        }
        if self.autoencoder.output_activation == Activation::Softmax {
            return bad("autoencoder output_activation must be relu or identity".into());
        }
        if let Some(VerticalSpec::Fraction(f)) = &self.vertical_split {
            if !(*f > 0.0 && *f < 1.0) {
                return bad(format!(
                    "vertical_split fraction must be in (0, 1), got {f}"
                ));
            }
        }
        if self.learner.is_some() && self.search.is_some() {
            return bad("give either learner or search, not both".into());
        }
        match (&self.learner, self.dataset.task) {
            (Some(LearnerSpec::Ridge { .. }), Task::Classification) => {
                return bad("ridge learner cannot be used for a classification task".into())
            }
            (Some(LearnerSpec::Logistic(_)), Task::Regression) => {
                return bad("logistic learner cannot be used for a regression task".into())
            }
            (Some(l), _) => l.validate().map_err(|e| Error::Manifest(e.to_string()))?,
            (None, _) => {}
        }
        if let Some(s) = &self.search {
            if s.n_samples == 0 || s.n_folds < 2 {
                return bad("search needs n_samples >= 1 and n_folds >= 2".into());
            }
        }
        let ae = &self.autoencoder;
        if ae.latent_dim == 0 || ae.encoder_hidden.contains(&0) {
            return bad("autoencoder dimensions must be >= 1".into());
        }
        if !(ae.lambda >= 0.0 && ae.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", ae.lambda));
        }
        let t = &self.training;
        if t.epochs == 0
            || t.batch_size == 0
            || !(t.learning_rate > 0.0 && t.learning_rate.is_finite())
        {
            return bad("training needs epochs >= 1, batch_size >= 1 and learning_rate > 0".into());
        }
        if self.dataset.subsample == Some(0) {
            return bad("subsample must be >= 1".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    /// SHA-256 of the manifest with `output_dir` blanked, so where a run is
    /// written does not change its identity.
    pub fn digest(&self) -> String {
        let mut keyed = self.clone();
        keyed.output_dir = PathBuf::new();
        let json = serde_json::to_string(&keyed).expect("manifest serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// `<output_dir>/s<scenario>-<first 12 digest chars>`
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir
            .join(format!("s{}-{}", self.scenario, &self.digest()[..12]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "toy",
        "scenario": 2,
        "seed": 7,
        "dataset": {"path": "toy.csv", "id_column": "id", "target_column": "y", "task": "regression"},
        "vertical_split": {"fraction": 0.5},
        "learner": {"kind": "ridge", "l2": 0.1}
    }"#;

    #[test]
    fn minimal_manifest_gets_defaults() {
        let m = ExperimentManifest::from_json(MINIMAL).unwrap();
        assert_eq!(m.autoencoder, AutoencoderSpec::default());
        assert_eq!(m.training.epochs, 200);
        assert_eq!(m.split, SplitFractions::default());
        assert_eq!(m.output_dir, PathBuf::from("runs"));
        let back = ExperimentManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn scenario_two_needs_vertical_split() {
        let text = MINIMAL.replace(r#""vertical_split": {"fraction": 0.5},"#, "");
        let err = ExperimentManifest::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("needs a vertical_split"), "{err}");
    }

    #[test]
    fn learner_must_fit_task() {
        let text = MINIMAL.replace(r#"{"kind": "ridge", "l2": 0.1}"#, r#"{"kind": "logistic"}"#);
        assert!(ExperimentManifest::from_json(&text).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace(r#""seed": 7,"#, r#""seed": 7, "sead": 1,"#);
        assert!(ExperimentManifest::from_json(&text).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentManifest::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.output_dir = "elsewhere".into();
        assert_eq!(a.digest(), b.digest());
        b.seed = 8;
        assert_ne!(a.digest(), b.digest());
        assert!(a.run_dir().to_string_lossy().starts_with("runs/s2-"));
    }

    #[test]
    fn relative_paths_follow_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, MINIMAL).unwrap();
        let m = ExperimentManifest::load(&path).unwrap();
        assert_eq!(m.dataset.path, dir.path().join("toy.csv"));
        assert_eq!(m.output_dir, dir.path().join("runs"));
    }
}
