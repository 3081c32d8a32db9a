use ndarray::ArrayView2;

use super::pipeline::{forward_scene, SceneForward, SceneInput};
use super::{mlp_forward, Model};
use crate::features::PairEmbedding;
use crate::{DepthImage, Error, Mask, Result};

/// Decoder outputs for one ray-voxel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction {
    /// Termination evidence; the per-ray argmax selects the surface voxel.
    pub logit: f64,
    /// Fraction of the voxel span travelled before the surface, in (0, 1).
    pub sigma: f64,
    /// Offset from the voxel entry along the ray, metres.
    pub delta: f64,
}

fn check(model: &Model, e: &PairEmbedding, span: f64) -> Result<()> {
    if !(span > 0.0) {
        return Err(Error::InvalidInput(format!("pair span {span} must be positive")));
    }
    let want = model.layout.prob_mlp.input_dim();
    if e.len() != want {
        return Err(Error::DimensionMismatch(format!("embedding has {} values, expected {want}", e.len())));
    }
    Ok(())
}

/// Scores one pair. The offset is `sigma * span`, so it never leaves the
/// voxel.
pub fn predict_pair(model: &Model, e: &PairEmbedding, span: f64) -> Result<PairPrediction> {
    check(model, e, span)?;
    let (logit, _) = mlp_forward(&model.layout.prob_mlp, &model.params, &e.values)?;
    let (sigma, _) = mlp_forward(&model.layout.offset_mlp, &model.params, &e.values)?;
    Ok(PairPrediction { logit: logit[0], sigma: sigma[0], delta: sigma[0] * span })
}

/// Reverse pass of [`predict_pair`] for upstream gradients on the logit and
/// the offset. Accumulates parameter gradients into `grad` and returns the
/// gradient w.r.t. the embedding.
pub fn predict_pair_backward(
    model: &Model,
    e: &PairEmbedding,
    span: f64,
    d_logit: f64,
    d_delta: f64,
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    check(model, e, span)?;
    let p = &model.params;
    let (_, prob_tape) = mlp_forward(&model.layout.prob_mlp, p, &e.values)?;
    let (_, off_tape) = mlp_forward(&model.layout.offset_mlp, p, &e.values)?;
    let dl = [d_logit];
    let ds = [d_delta * span];
    let a = model.layout.prob_mlp.backward(p, &prob_tape, ArrayView2::from_shape((1, 1), &dl).unwrap(), grad);
    let b = model.layout.offset_mlp.backward(p, &off_tape, ArrayView2::from_shape((1, 1), &ds).unwrap(), grad);
    Ok((a + b).row(0).to_vec())
}

/// Restored depth together with the forward pass that produced it.
#[derive(Debug, Clone)]
pub struct RestoreOutput {
    pub depth: DepthImage,
    /// Masked pixels that received a prediction.
    pub restored: usize,
    /// Masked pixels whose ray met no occupied voxel; they keep input depth.
    pub unrestored: usize,
    /// Pixels that received a prediction.
    pub predicted: Mask,
    pub forward: Option<SceneForward>,
}

/// Replaces the depth of every pixel in `scene.mask` by the depth at the
/// selected pair of its ray. Unmasked pixels, and masked rays that meet no
/// occupied voxel, keep the input depth.
pub fn restore(model: &Model, scene: &SceneInput) -> Result<RestoreOutput> {
    let mut depth = scene.depth.clone();
    let mut predicted = Mask::empty(depth.width, depth.height);
    if scene.mask.count() == 0 {
        return Ok(RestoreOutput { depth, restored: 0, unrestored: 0, predicted, forward: None });
    }
    let fwd = forward_scene(model, scene)?;
    let (mut restored, mut unrestored) = (0, 0);
    for (i, ray) in fwd.rays.iter().enumerate() {
        let (u, v) = ray.pixel;
        match fwd.ray_depth(i) {
            Some(d) if d.is_finite() && d > 0.0 => {
                depth.set(u, v, d);
                predicted.set(u, v, true);
                restored += 1;
            }
            _ => unrestored += 1,
        }
    }
    Ok(RestoreOutput { depth, restored, unrestored, predicted, forward: Some(fwd) })
}
