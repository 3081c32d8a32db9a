use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam moments and step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { step: 0, m: vec![0.0; n], v: vec![0.0; n], beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Step size for `epoch` (0-based) of `epochs`: `lr` until the last
/// `late_fraction` of the run, `lr_late` afterwards.
pub fn scheduled_lr(epoch: usize, epochs: usize, lr: f64, lr_late: f64, late_fraction: f64) -> f64 {
    if (epoch as f64) < (1.0 - late_fraction) * epochs as f64 {
        lr
    } else {
        lr_late
    }
}

/// Bias-corrected Adam update. Parameters are untouched when any gradient is
/// non-finite.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Diverged(format!("gradient {i} is {}", grads[i])));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}
