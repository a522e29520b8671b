//! Mini-batch SGD with momentum, linear warmup, and decay to zero.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{HokemError, Result};
use crate::features::FeatureMatrix;
use crate::network::Model;
use crate::par::par_map;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub total_epochs: usize,
    pub warmup_epochs: usize,
    pub peak_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Replace the linear decay with a half-cosine; warmup stays linear.
    pub cosine_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_epochs: 80,
            warmup_epochs: 10,
            peak_lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0001,
            batch_size: 16,
            seed: 0,
            cosine_decay: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs >= self.total_epochs {
            return Err(HokemError::Config(format!(
                "warmup ({}) must be shorter than the run ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if !(self.peak_lr > 0.0) || self.batch_size == 0 {
            return Err(HokemError::Config(
                "peak_lr and batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return Err(HokemError::Config(
                "momentum must lie in [0, 1) and weight_decay must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One human-object pair ready for the network, with the identifiers the
/// evaluator needs to rebuild a detection from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HOSample {
    pub features: FeatureMatrix,
    /// Multi-hot target, one entry per class.
    pub labels: Vec<f64>,
    /// Weakly informative external detector scores, each in (0, 1].
    pub baseline_probs: Vec<f64>,
    pub image_id: u64,
    pub human_box: [f64; 4],
    pub object_box: [f64; 4],
}

/// Learning rate at a (possibly fractional) epoch: linear from 0 to
/// `peak_lr` over the warmup, then linear (or half-cosine) back to 0 at
/// `total_epochs`. Continuous, peaking exactly at the warmup boundary.
pub fn lr_at(config: &TrainConfig, epoch: f64) -> Result<f64> {
    let total = config.total_epochs as f64;
    let warmup = config.warmup_epochs as f64;
    if !(0.0..=total).contains(&epoch) {
        return Err(HokemError::Contract(format!(
            "epoch {epoch} outside the schedule [0, {total}]"
        )));
    }
    Ok(if epoch <= warmup && warmup > 0.0 {
        config.peak_lr * epoch / warmup
    } else if config.cosine_decay {
        let t = (epoch - warmup) / (total - warmup);
        config.peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    } else {
        config.peak_lr * (total - epoch) / (total - warmup)
    })
}

/// Classical momentum step with coupled weight decay:
/// `v <- momentum*v + grad + weight_decay*param; param <- param - lr*v`.
/// A non-finite gradient aborts before any state is touched.
pub fn sgd_step(
    params: &mut [Tensor],
    velocity: &mut [Tensor],
    grads: &[Tensor],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != velocity.len() || params.len() != grads.len() {
        return Err(HokemError::Contract(format!(
            "optimizer state arity mismatch: {} params, {} velocities, {} grads",
            params.len(),
            velocity.len(),
            grads.len()
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        if g.shape() != params[i].shape() {
            return Err(HokemError::ShapeMismatch {
                op: "sgd_step",
                lhs: params[i].shape(),
                rhs: g.shape(),
            });
        }
        if !g.is_finite() {
            return Err(HokemError::Contract(format!(
                "non-finite gradient for parameter {i}; step aborted"
            )));
        }
    }
    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        let pv = p.make_mut();
        let vv = v.make_mut();
        for (k, &gk) in g.data().iter().enumerate() {
            vv[k] = momentum * vv[k] + gk + weight_decay * pv[k];
            pv[k] -= lr * vv[k];
        }
    }
    Ok(())
}

/// Mean loss and mean parameter gradients over the indexed samples.
/// Per-sample work fans out; the reduction is sequential and ordered.
pub fn batch_gradients(
    model: &Model,
    samples: &[HOSample],
    indices: &[usize],
) -> Result<(f64, Vec<Tensor>)> {
    if indices.is_empty() {
        return Err(HokemError::Contract("empty batch".into()));
    }
    let per_sample = par_map(indices, |&i| {
        let s = &samples[i];
        let target = Tensor::new(1, s.labels.len(), s.labels.clone());
        model.sample_loss_grads(&s.features.to_tensor(), &target)
    });
    let scale = 1.0 / indices.len() as f64;
    let mut total_loss = 0.0;
    let mut acc: Option<Vec<Tensor>> = None;
    for result in per_sample {
        let (loss, grads) = result?;
        total_loss += loss;
        acc = Some(match acc {
            None => grads,
            Some(prev) => prev.iter().zip(&grads).map(|(a, b)| a.add(b)).collect(),
        });
    }
    let grads = acc
        .expect("non-empty batch")
        .iter()
        .map(|g| g.scale(scale))
        .collect();
    Ok((total_loss * scale, grads))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
}

fn train_epoch(
    model: &mut Model,
    velocity: &mut [Tensor],
    samples: &[HOSample],
    order: &[usize],
    lr: f64,
    config: &TrainConfig,
) -> Result<f64> {
    let mut loss_sum = 0.0;
    for batch in order.chunks(config.batch_size) {
        let (loss, grads) = batch_gradients(model, samples, batch)?;
        if !loss.is_finite() {
            return Err(HokemError::Contract("non-finite batch loss".into()));
        }
        loss_sum += loss * batch.len() as f64;
        sgd_step(
            model.params_mut(),
            velocity,
            &grads,
            lr,
            config.momentum,
            config.weight_decay,
        )?;
    }
    Ok(loss_sum / order.len() as f64)
}

/// Runs the full schedule over shuffled mini-batches. On divergence the
/// model is rolled back to the end of the last completed epoch and the
/// error reports where training stopped.
pub fn train(
    model: &mut Model,
    samples: &[HOSample],
    config: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(HokemError::Contract("training set is empty".into()));
    }
    let mut velocity: Vec<Tensor> = model
        .params()
        .iter()
        .map(|p| Tensor::zeros(p.rows(), p.cols()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.total_epochs);
    for epoch in 0..config.total_epochs {
        let lr = lr_at(config, epoch as f64)?;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let snapshot: Vec<Tensor> = model.params().to_vec();
        match train_epoch(model, &mut velocity, samples, &order, lr, config) {
            Ok(mean_loss) => history.push(EpochStats {
                epoch,
                lr,
                mean_loss,
            }),
            Err(e) => {
                model.set_params(snapshot)?;
                return Err(HokemError::Diverged {
                    epoch,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(history)
}

/// Loss history as `epoch,lr,mean_loss` CSV.
pub fn write_loss_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,lr,mean_loss\n");
    for s in history {
        out.push_str(&format!("{},{},{}\n", s.epoch, s.lr, s.mean_loss));
    }
    Ok(std::fs::write(path, out)?)
}
