use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, scheduled_lr, AdamState};
use super::objective::{total_loss, LossWeights};
use crate::metrics::{evaluate_dataset, MetricReport};
use crate::{Error, Model, Result, SceneRecord};

/// Optimisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub lr: f64,
    pub lr_late: f64,
    /// Trailing fraction of epochs that use `lr_late`.
    pub late_fraction: f64,
    /// Stops after this many optimiser steps in total.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            seed: 0,
            weights: LossWeights::default(),
            lr: 1e-3,
            lr_late: 1e-4,
            late_fraction: 0.2,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.lr > 0.0 && self.lr_late > 0.0) || !(0.0..=1.0).contains(&self.late_fraction) {
            return Err(Error::Config(format!(
                "learning rates must be positive and the late fraction in [0, 1]: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub steps: usize,
    pub loss: f64,
    pub depth: f64,
    pub prob: f64,
    pub norm: f64,
    pub supervised_fraction: f64,
    /// Scenes skipped for lack of supervision.
    pub skipped: usize,
    pub val: Option<MetricReport>,
}

/// Result of a run: the best-validation model (the last one without a
/// validation split), its epoch and the log.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Model,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochLog>,
    pub step_losses: Vec<f64>,
    /// Set when a step produced a non-finite loss or gradient; `model` is
    /// then the best checkpoint before it.
    pub diverged: Option<String>,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Adam over one scene per step, scenes reshuffled every epoch from the run
/// seed. Validation RMSE on `val` after each epoch selects the returned
/// model. `on_epoch` sees every log line as soon as it is complete.
pub fn train(
    init: Model,
    train_set: &[SceneRecord],
    val_set: &[SceneRecord],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut model = init;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut adam = AdamState::new(model.param_count());
    let mut grad = vec![0.0; model.param_count()];
    let mut log = Vec::new();
    let mut step_losses = Vec::new();
    let mut diverged = None;
    let mut steps = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        if cfg.max_steps.is_some_and(|m| steps >= m) {
            break;
        }
        let lr = scheduled_lr(epoch, cfg.epochs, cfg.lr, cfg.lr_late, cfg.late_fraction);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch)));
        let mut entry = EpochLog {
            epoch,
            lr,
            steps: 0,
            loss: 0.0,
            depth: 0.0,
            prob: 0.0,
            norm: 0.0,
            supervised_fraction: 0.0,
            skipped: 0,
            val: None,
        };
        let (mut sup, mut rays) = (0usize, 0usize);
        for &i in &order {
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let r = total_loss(&model, &train_set[i], &cfg.weights, Some(&mut grad))?;
            sup += r.supervised;
            rays += r.supervised + r.excluded;
            if r.supervised == 0 {
                entry.skipped += 1;
                continue;
            }
            if !r.total.is_finite() {
                diverged = Some(format!("loss {} at epoch {epoch}", r.total));
                break 'epochs;
            }
            if let Err(e) = adam_step(&mut adam, &mut model.params, &grad, lr) {
                diverged = Some(format!("{e} at epoch {epoch}"));
                break 'epochs;
            }
            steps += 1;
            entry.steps += 1;
            entry.loss += r.total;
            entry.depth += r.depth;
            entry.prob += r.prob;
            entry.norm += r.norm;
            step_losses.push(r.total);
        }
        if entry.steps > 0 {
            let n = entry.steps as f64;
            entry.loss /= n;
            entry.depth /= n;
            entry.prob /= n;
            entry.norm /= n;
        }
        if rays > 0 {
            entry.supervised_fraction = sup as f64 / rays as f64;
        }
        if !val_set.is_empty() {
            let ev = evaluate_dataset(&model, val_set.iter().enumerate())?;
            if best.as_ref().is_none_or(|b| ev.restored.rmse < b.0) {
                best = Some((ev.restored.rmse, epoch, model.params.clone()));
            }
            entry.val = Some(ev.restored);
        } else {
            best = Some((f64::NAN, epoch, model.params.clone()));
        }
        on_epoch(&entry);
        log.push(entry);
    }

    let best_epoch = best.as_ref().map(|b| b.1);
    // Without a finished epoch the parameters are the last good ones, since
    // failing steps never reach the update.
    if let Some((_, _, params)) = best {
        model.params = params;
    }
    Ok(TrainOutput { model, best_epoch, log, step_losses, diverged })
}
