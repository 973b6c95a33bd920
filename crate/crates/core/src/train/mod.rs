//! Losses, metrics, the optimizer and the training loop.

mod adam;
mod backward;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::darcy::Sample;
use crate::error::{invalid, Error, Result};
use crate::grid::GridField2D;
use crate::operator::{Normalization, OperatorModel, Variant};
use crate::randfield::RngStream;

pub use adam::{adam_step, AdamState};
pub use backward::{batch_loss, gradients, loss_and_gradients, Gradients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Epochs between learning-rate decays.
    pub decay_every: usize,
    pub decay_ratio: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Coefficient of an optional `0.5 * lambda * |theta|^2` penalty.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr0: 1e-3,
            decay_every: 100,
            decay_ratio: 0.5,
            batch_size: 20,
            seed: 0,
            precision: Precision::F64,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return invalid(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay_ratio > 0.0 && self.decay_ratio <= 1.0) {
            return invalid(format!("decay_ratio must be in (0, 1], got {}", self.decay_ratio));
        }
        if self.batch_size == 0 || self.decay_every == 0 {
            return invalid("batch_size and decay_every must be at least 1");
        }
        if self.weight_decay < 0.0 {
            return invalid("weight_decay must be non-negative");
        }
        if self.precision == Precision::F32 {
            return invalid("32-bit training is not available; use f64");
        }
        Ok(())
    }
}

/// Step decay: `lr0 * decay_ratio^floor(epoch / decay_every)`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    config.lr0 * config.decay_ratio.powi((epoch / config.decay_every) as i32)
}

/// `|pred - truth|_2 / |truth|_2` over all nodes and channels.
pub fn relative_l2(pred: &GridField2D, truth: &GridField2D) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return invalid("prediction and truth shapes differ");
    }
    let tn = truth.norm_l2();
    if tn == 0.0 {
        return invalid("relative error undefined for an all-zero target");
    }
    let en = pred.data().iter().zip(truth.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(en / tn)
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-sample relative errors of a model over a split.
pub fn sample_errors(model: &OperatorModel, split: &[Sample]) -> Result<Vec<f64>> {
    split.iter().map(|s| relative_l2(&model.forward(&s.input)?, &s.output)).collect()
}

/// Mean relative error and its standard error over a split.
pub fn evaluate(model: &OperatorModel, split: &[Sample]) -> Result<(f64, f64)> {
    if split.is_empty() {
        return invalid("cannot evaluate on an empty split");
    }
    Ok(mean_and_standard_error(&sample_errors(model, split)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_metric: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn train_loss(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }

    pub fn test_metric(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.test_metric).collect()
    }

    pub fn lr(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lr).collect()
    }

    /// CSV with header `epoch,lr,train_loss,test_metric,seconds`. Without
    /// `timing` the seconds column is written as `0` so files are reproducible.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from("epoch,lr,train_loss,test_metric,seconds\n");
        for r in &self.records {
            let secs = if timing { r.seconds } else { 0.0 };
            let _ = writeln!(out, "{},{},{},{},{}", r.epoch, r.lr, r.train_loss, r.test_metric, secs);
        }
        out
    }
}

/// Shuffle stream for epoch `e` is `(seed ^ SHUFFLE_TAG, e)`.
const SHUFFLE_TAG: u64 = 0x5EED_5F1F_F1E5_0000;

/// Mini-batch Adam on the mean relative L2 loss. The model's normalization is
/// used as is; see [`OperatorModel::fit_normalization`].
pub fn train(
    mut model: OperatorModel,
    train_split: &[Sample],
    test_split: &[Sample],
    config: &TrainConfig,
) -> Result<(OperatorModel, TrainHistory)> {
    config.validate()?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((model, history));
    }
    if train_split.is_empty() {
        return invalid("training split is empty");
    }
    let mut state = AdamState::for_model(&model);
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let lr = lr_at(config, epoch);
        RngStream::new(config.seed ^ SHUFFLE_TAG, epoch as u64).draws().shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train_split[i]));
            let (loss, mut grads) = backward::loss_and_gradients_of(&model, &batch).map_err(|e| match e {
                Error::NumericalFailure(m) => Error::NumericalFailure(format!("epoch {epoch}, batch {bi}: {m}")),
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::NumericalFailure(format!("epoch {epoch}, batch {bi}: loss is {loss}")));
            }
            if config.weight_decay > 0.0 {
                for (g, p) in grads.values.iter_mut().zip(model.params()) {
                    *g += config.weight_decay * p;
                }
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut model, &grads, &mut state, lr);
        }
        let test_metric = if test_split.is_empty() { f64::NAN } else { evaluate(&model, test_split)?.0 };
        history.records.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / train_split.len() as f64,
            test_metric,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, history))
}

/// Seeds a deeper IFNO with a trained one: all parameters and normalization
/// are copied, only the depth (and so `dt = 1/L`) changes.
pub fn shallow_to_deep(trained: &OperatorModel, new_layers: usize) -> Result<OperatorModel> {
    if trained.hyper().variant != Variant::Ifno {
        return invalid("shallow-to-deep initialization needs layer-independent IFNO parameters");
    }
    if new_layers < trained.hyper().layers {
        return invalid(format!(
            "new depth {new_layers} is shallower than the trained depth {}",
            trained.hyper().layers
        ));
    }
    trained.with_layers(new_layers)
}

impl OperatorModel {
    /// Sets input/output standardization from a training split.
    pub fn fit_normalization(&mut self, train_split: &[Sample]) -> Result<()> {
        let norm = Normalization::fit(train_split)?;
        if norm.in_mean.len() != self.hyper().d_f || norm.out_mean.len() != self.hyper().d_u {
            return invalid("training data channels do not match the model");
        }
        self.norm = norm;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_l2_examples() {
        let t = GridField2D::new(2, 2, 1, vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        assert_eq!(relative_l2(&t, &t).unwrap(), 0.0);
        let twice = GridField2D::new(2, 2, 1, t.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!((relative_l2(&twice, &t).unwrap() - 1.0).abs() < 1e-15);
        let zero = GridField2D::zeros(t.shape());
        assert!(relative_l2(&t, &zero).is_err());
    }

    #[test]
    fn two_node_hand_value() {
        // 2x1 channel pair on the smallest grid: pred [1, 0], truth [1, 1]
        let pred = GridField2D::new(2, 2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let truth = GridField2D::new(2, 2, 1, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((relative_l2(&pred, &truth).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn schedule_examples() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(&c, 0), 1e-3);
        assert_eq!(lr_at(&c, 99), 1e-3);
        assert_eq!(lr_at(&c, 100), 5e-4);
        assert_eq!(lr_at(&c, 250), 2.5e-4);
    }

    #[test]
    fn standard_error_hand_statistics() {
        let (m, se) = mean_and_standard_error(&[0.1, 0.2, 0.3]);
        assert!((m - 0.2).abs() < 1e-15);
        assert!((se - 0.1 / 3f64.sqrt()).abs() < 1e-15);
        assert!((se - 0.0577).abs() < 5e-5);
        assert_eq!(mean_and_standard_error(&[0.4]), (0.4, 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lr0: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { decay_ratio: 1.5, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { precision: Precision::F32, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            records: vec![EpochRecord { epoch: 0, lr: 1e-3, train_loss: 0.5, test_metric: 0.25, seconds: 1.5 }],
        };
        assert_eq!(h.to_csv(true), "epoch,lr,train_loss,test_metric,seconds\n0,0.001,0.5,0.25,1.5\n");
        assert_eq!(h.to_csv(false), "epoch,lr,train_loss,test_metric,seconds\n0,0.001,0.5,0.25,0\n");
    }
}
