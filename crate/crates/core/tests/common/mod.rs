#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lse_core::data::{Task, VerticalSpec};
use lse_core::downstream::{LearnerSpec, LogisticParams};
use lse_core::numeric::Rng;
use lse_core::scenario::{AutoencoderSpec, DatasetSpec, ExperimentManifest, TrainingSpec};

/// `y = 10 + 3·x0 − 2·x1 + x2·x3 + noise` over six uniform features.
pub fn regression_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = Rng::new(seed);
    let mut out = String::from("row_id,f0,f1,f2,f3,f4,f5,price\n");
    for i in 0..n {
        let x: Vec<f64> = (0..6).map(|_| rng.next_f64()).collect();
        let y = 10.0 + 3.0 * x[0] - 2.0 * x[1] + x[2] * x[3] + 0.1 * rng.normal();
        let _ = write!(out, "r{i}");
        for v in &x {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{y}");
    }
    let path = dir.join("regression.csv");
    fs::write(&path, out).unwrap();
    path
}

/// Three Gaussian blobs in six dimensions.
pub fn classification_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = Rng::new(seed);
    let mut out = String::from("id,label,a,b,c,d,e,f\n");
    for i in 0..n {
        let label = i % 3;
        let _ = write!(out, "{i},{label}");
        for j in 0..6 {
            let center = if j % 3 == label { 2.0 } else { 0.0 };
            let _ = write!(out, ",{}", center + 0.5 * rng.normal());
        }
        out.push('\n');
    }
    let path = dir.join("classes.csv");
    fs::write(&path, out).unwrap();
    path
}

pub fn small_autoencoder() -> AutoencoderSpec {
    AutoencoderSpec {
        latent_dim: 4,
        encoder_hidden: [16, 12, 8],
        ..AutoencoderSpec::default()
    }
}

pub fn fast_training() -> TrainingSpec {
    TrainingSpec {
        epochs: 30,
        batch_size: 32,
        learning_rate: 1e-3,
    }
}

pub fn regression_manifest(csv: &Path, out: &Path, scenario: u8) -> ExperimentManifest {
    ExperimentManifest {
        name: "synthetic-regression".into(),
        scenario,
        seed: 11,
        dataset: DatasetSpec {
            path: csv.to_owned(),
            id_column: "row_id".into(),
            target_column: "price".into(),
            task: Task::Regression,
            subsample: None,
        },
        split: Default::default(),
        vertical_split: Some(VerticalSpec::Fraction(0.5)),
        autoencoder: small_autoencoder(),
        training: fast_training(),
        learner: Some(LearnerSpec::ridge(1e-3)),
        search: None,
        output_dir: out.to_owned(),
    }
}

pub fn classification_manifest(csv: &Path, out: &Path, scenario: u8) -> ExperimentManifest {
    ExperimentManifest {
        name: "synthetic-classes".into(),
        scenario,
        seed: 5,
        dataset: DatasetSpec {
            path: csv.to_owned(),
            id_column: "id".into(),
            target_column: "label".into(),
            task: Task::Classification,
            subsample: None,
        },
        split: Default::default(),
        vertical_split: Some(VerticalSpec::Fraction(0.5)),
        autoencoder: small_autoencoder(),
        training: fast_training(),
        learner: Some(LearnerSpec::Logistic(LogisticParams {
            learning_rate: 0.01,
            l2: 1e-4,
            epochs: 60,
            batch_size: 32,
            seed: 0,
        })),
        search: None,
        output_dir: out.to_owned(),
    }
}
