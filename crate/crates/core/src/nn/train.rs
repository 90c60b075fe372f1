//! Mini-batch training with a seeded validation split and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::adam_step;
use super::loss::Loss;
use super::model::Model;
use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub validation_split: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rng_seed: u64,
    /// Per-epoch cap on negatives as a multiple of positives (classification only).
    #[serde(default)]
    pub max_negative_ratio: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            validation_split: 0.2,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            rng_seed: 0,
            max_negative_ratio: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return Err(Error::Config("validation split must lie in (0, 1)".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and epoch count must be >= 1".into()));
        }
        if let Some(r) = self.max_negative_ratio {
            if !(r > 0.0) {
                return Err(Error::Config("negative ratio must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Row-major inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub input_len: usize,
    pub target_len: usize,
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(input_len: usize, target_len: usize) -> Self {
        Self {
            input_len,
            target_len,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[T], target: &[T]) {
        assert_eq!(input.len(), self.input_len);
        assert_eq!(target.len(), self.target_len);
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn len(&self) -> usize {
        if self.target_len == 0 {
            0
        } else {
            self.targets.len() / self.target_len
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.input_len..(i + 1) * self.input_len]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.target_len..(i + 1) * self.target_len]
    }

    fn gather(&self, idx: &[usize]) -> (Vec<T>, Vec<T>) {
        let mut x = Vec::with_capacity(idx.len() * self.input_len);
        let mut y = Vec::with_capacity(idx.len() * self.target_len);
        for &i in idx {
            x.extend_from_slice(self.input(i));
            y.extend_from_slice(self.target(i));
        }
        (x, y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Fraction of validation samples classified correctly at 0.5.
    pub val_accuracy: Option<f64>,
    /// Mean squared error over all validation outputs.
    pub val_mse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainResult<T> {
    pub model: Model<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
}

impl<T> TrainResult<T> {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

/// Validation metrics of `model` on the given samples.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Dataset<T>, idx: &[usize], loss: Loss) -> Result<(f64, Option<f64>, Option<f64>)> {
    let (x, y) = data.gather(idx);
    let pred = model.predict(&x, idx.len())?;
    let w = data.target_len;
    let mut total = 0.0;
    let mut correct = 0usize;
    let mut sq = 0.0;
    for s in 0..idx.len() {
        let p = &pred[s * w..(s + 1) * w];
        let t = &y[s * w..(s + 1) * w];
        total += loss.value(p, t).f64();
        for (a, b) in p.iter().zip(t) {
            sq += (a.f64() - b.f64()).powi(2);
        }
        if (p[0].f64() >= 0.5) == (t[0].f64() >= 0.5) {
            correct += 1;
        }
    }
    let n = idx.len() as f64;
    Ok(match loss {
        Loss::Bce => (total / n, Some(correct as f64 / n), None),
        Loss::LogCosh => (total / n, None, Some(sq / (n * w as f64))),
    })
}

/// Trains until `patience` epochs pass without a validation-loss improvement
/// and returns the best parameters seen.
pub fn train<T: Scalar>(mut model: Model<T>, data: &Dataset<T>, cfg: &TrainConfig, loss: Loss) -> Result<TrainResult<T>> {
    cfg.validate()?;
    if data.input_len != model.input_shape().0 * model.input_shape().1 || data.target_len != model.output_len() {
        return Err(Error::Shape("dataset does not match model input/output".into()));
    }
    let n = data.len();
    let n_val = (n as f64 * cfg.validation_split).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Config(format!(
            "validation split {} of {n} samples leaves an empty split",
            cfg.validation_split
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let (positives, negatives): (Vec<usize>, Vec<usize>) = train_idx.iter().partition(|&&i| data.target(i)[0].f64() >= 0.5);

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<T>)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut epoch_idx = match (loss, cfg.max_negative_ratio) {
            (Loss::Bce, Some(ratio)) => {
                let cap = ((positives.len() as f64 * ratio).ceil() as usize).max(1);
                let mut neg = negatives.clone();
                neg.shuffle(&mut rng);
                neg.truncate(cap);
                positives.iter().copied().chain(neg).collect::<Vec<_>>()
            }
            _ => train_idx.to_vec(),
        };
        epoch_idx.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in epoch_idx.chunks(cfg.batch_size) {
            let (x, y) = data.gather(batch);
            let (l, g) = model.gradients(&x, &y, batch.len(), loss)?;
            adam_step(&mut model, &g, cfg.learning_rate)?;
            sum += l.f64() * batch.len() as f64;
        }
        let (val_loss, val_accuracy, val_mse) = evaluate(&model, data, &val_idx, loss)?;
        let record = EpochRecord {
            epoch,
            train_loss: sum / epoch_idx.len() as f64,
            val_loss,
            val_accuracy,
            val_mse,
        };
        log::debug!("epoch {epoch}: {record:?}");
        history.push(record);
        if best.as_ref().map_or(true, |b| val_loss < b.0) {
            best = Some((val_loss, epoch, model.params().to_vec()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    model.params_mut().copy_from_slice(&params);
    Ok(TrainResult {
        model,
        history,
        best_epoch,
    })
}
