use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AutoencoderModel;
use crate::data::ScalerParams;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON dump of a trained model plus the scaler and column names it was fitted
/// with. Floats are written in shortest round-trip form, so save→load is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub scaler: Option<ScalerParams>,
    pub model: AutoencoderModel,
}

impl Checkpoint {
    pub fn new(
        model: AutoencoderModel,
        feature_names: Vec<String>,
        scaler: Option<ScalerParams>,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            feature_names,
            scaler,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.format_version
            )));
        }
        ckpt.model.config().validate()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{train, AutoencoderConfig, TrainConfig};
    use crate::numeric::{Matrix, Rng};

    #[test]
    fn save_load_encode_is_bitwise_equal() {
        let mut rng = Rng::new(1);
        let x = Matrix::from_vec(20, 5, (0..100).map(|_| rng.next_f64()).collect()).unwrap();
        let mut model =
            AutoencoderModel::build(AutoencoderConfig::new(5, 3), &mut Rng::new(2)).unwrap();
        train(
            &mut model,
            &x,
            None,
            &TrainConfig {
                epochs: 3,
                batch_size: 7,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let scaler = ScalerParams {
            min: vec![0.0; 5],
            max: vec![1.0; 5],
        };
        let names: Vec<String> = (0..5).map(|i| format!("f{i}")).collect();
        let ckpt = Checkpoint::new(model.clone(), names, Some(scaler));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        let a = model.encode_matrix(&x).unwrap();
        let b = back.model.encode_matrix(&x).unwrap();
        assert!(a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn rejects_other_versions() {
        let model =
            AutoencoderModel::build(AutoencoderConfig::new(3, 2), &mut Rng::new(0)).unwrap();
        let mut ckpt = Checkpoint::new(model, vec!["a".into(), "b".into(), "c".into()], None);
        ckpt.format_version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        std::fs::write(&path, serde_json::to_vec(&ckpt).unwrap()).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
