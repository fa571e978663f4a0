use serde::{Deserialize, Serialize};

use super::model::{AutoencoderModel, TargetScale, TaskTarget};
use crate::numeric::{AdamConfig, AdamState, Matrix, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-4,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch losses. `validation` is empty when no validation rows were given;
/// the component vectors are filled only for multitask training.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub task: Vec<f64>,
}

/// Minibatch Adam on the reconstruction MAE.
pub fn train(
    model: &mut AutoencoderModel,
    x_train: &Matrix,
    x_val: Option<&Matrix>,
    tc: &TrainConfig,
) -> Result<TrainHistory> {
    run(model, x_train, None, x_val.map(|x| (x, None)), tc)
}

/// Minibatch Adam on `MAE(x̂, x) + λ·task`. Regression targets are given in
/// original units and standardised on the training rows.
pub fn train_multitask(
    model: &mut AutoencoderModel,
    x_train: &Matrix,
    y_train: TaskTarget<'_>,
    validation: Option<(&Matrix, TaskTarget<'_>)>,
    tc: &TrainConfig,
) -> Result<TrainHistory> {
    if model.head().is_none() {
        return Err(Error::InvalidArgument(
            "train_multitask needs a model built with a multitask config".into(),
        ));
    }
    match y_train {
        TaskTarget::Regression(y) => {
            let scale = TargetScale::fit(y);
            model.set_target_scale(Some(scale));
            let y_std: Vec<f64> = y.iter().map(|&v| scale.apply(v)).collect();
            let val_std = validation.map(|(x, t)| match t {
                TaskTarget::Regression(v) => {
                    Ok((x, v.iter().map(|&v| scale.apply(v)).collect::<Vec<_>>()))
                }
                TaskTarget::Classes(_) => Err(Error::InvalidArgument(
                    "validation target type differs from training".into(),
                )),
            });
            let val_std = val_std.transpose()?;
            run(
                model,
                x_train,
                Some(TaskTarget::Regression(&y_std)),
                val_std
                    .as_ref()
                    .map(|(x, y)| (*x, Some(TaskTarget::Regression(y)))),
                tc,
            )
        }
        TaskTarget::Classes(_) => {
            model.set_target_scale(None);
            run(
                model,
                x_train,
                Some(y_train),
                validation.map(|(x, t)| (x, Some(t))),
                tc,
            )
        }
    }
}

fn run(
    model: &mut AutoencoderModel,
    x_train: &Matrix,
    target: Option<TaskTarget<'_>>,
    validation: Option<(&Matrix, Option<TaskTarget<'_>>)>,
    tc: &TrainConfig,
) -> Result<TrainHistory> {
    tc.validate()?;
    let n = x_train.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("no training rows".into()));
    }
    if x_train.cols() != model.input_dim() {
        return Err(Error::shape(
            "train",
            format!("input {}", x_train.shape_str()),
            format!("N = {}", model.input_dim()),
        ));
    }
    if let Some(t) = &target {
        if t.len() != n {
            return Err(Error::shape(
                "train",
                format!("{} rows", n),
                format!("{} targets", t.len()),
            ));
        }
    }
    let multitask = target.is_some();
    let mut adam = AdamState::new(
        AdamConfig::with_learning_rate(tc.learning_rate),
        &model.buffer_sizes(),
    );
    let mut rng = Rng::new(tc.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=tc.epochs {
        if tc.shuffle {
            rng.shuffle(&mut order);
        }
        let (mut total, mut recon, mut task) = (0.0, 0.0, 0.0);
        for (b, rows) in order.chunks(tc.batch_size).enumerate() {
            let xb = x_train.select_rows(rows);
            let yb = target.map(|t| t.select(rows));
            let (parts, grads) =
                model.loss_and_gradients(&xb, yb.as_ref().map(|t| t.as_target()))?;
            if !parts.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b + 1,
                });
            }
            let w = rows.len() as f64;
            total += parts.total * w;
            recon += parts.reconstruction * w;
            task += parts.task * w;
            let grad_refs: Vec<&[f64]> = grads.0.iter().map(Vec::as_slice).collect();
            adam.update(&mut model.buffers_mut(), &grad_refs)?;
        }
        history.train.push(total / n as f64);
        if multitask {
            history.reconstruction.push(recon / n as f64);
            history.task.push(task / n as f64);
        }
        if let Some((xv, yv)) = &validation {
            if xv.rows() > 0 {
                let parts = model.loss(xv, *yv)?;
                history.validation.push(parts.total);
            }
        }
    }
    if !model.is_finite() {
        return Err(Error::Diverged {
            epoch: tc.epochs,
            batch: n.div_ceil(tc.batch_size),
        });
    }
    Ok(history)
}
