use serde::{Deserialize, Serialize};

use super::losses::{normal_at, normal_backward, normal_defined, softmax_cross_entropy};
use super::targets::{build_targets, SupervisionTarget};
use crate::network::{backward_scene, forward_scene, SceneForward, SceneGrad};
use crate::{Error, Model, RayVoxelPair, Result, SceneRecord};

/// Weights of the depth, termination and normal terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub depth: f64,
    pub prob: f64,
    pub norm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { depth: 200.0, prob: 10.0, norm: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.depth, self.prob, self.norm].iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("loss weights must be non-negative, got {self:?}")))
        }
    }
}

/// Loss terms of one scene.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub depth: f64,
    pub prob: f64,
    pub norm: f64,
    pub supervised: usize,
    pub excluded: usize,
    pub normal_pixels: usize,
}

/// Pair lists of every ray of a forward pass.
pub fn ray_pair_lists(fwd: &SceneForward) -> Vec<Vec<RayVoxelPair>> {
    (0..fwd.rays.len()).map(|r| fwd.pairs_of(r).iter().map(|p| p.pair).collect()).collect()
}

/// Targets for a forward pass against the scene's perfect depth.
pub fn scene_targets(scene: &SceneRecord, fwd: &SceneForward) -> SupervisionTarget {
    build_targets(&scene.depth_gt, &fwd.rays, &ray_pair_lists(fwd))
}

/// Weighted sum of the mean L1 depth error, the per-ray softmax
/// cross-entropy of the true pair and the mean normal cosine distance.
///
/// The normal term compares normals of the perfect depth with normals of the
/// perfect depth in which supervised rays carry their predictions; it covers
/// object pixels with at least one supervised neighbour. When `grad` is
/// given the parameter gradient is accumulated into it. A scene without
/// supervised rays contributes zero loss and no gradient.
pub fn total_loss(model: &Model, scene: &SceneRecord, w: &LossWeights, grad: Option<&mut [f64]>) -> Result<LossReport> {
    let fwd = forward_scene(model, &scene.input())?;
    let targets = scene_targets(scene, &fwd);
    let n_sup = targets.supervised();
    let mut report = LossReport { supervised: n_sup, excluded: targets.excluded, ..Default::default() };
    if n_sup == 0 {
        return Ok(report);
    }
    let k = &scene.intrinsics;
    let (width, height) = (k.width, k.height);
    let inv = 1.0 / n_sup as f64;
    let mut g = SceneGrad::zeros(fwd.pairs.len());
    // Upstream gradient w.r.t. each ray's predicted depth.
    let mut d_depth = vec![0.0; fwd.rays.len()];
    let mut ray_at = vec![usize::MAX; width * height];
    let mut composite = scene.depth_gt.clone();

    for (r, t) in targets.rays.iter().enumerate() {
        let Some(t) = t else { continue };
        let d = fwd.ray_depth(r).expect("supervised rays have pairs");
        let err = d - t.depth;
        report.depth += err.abs() * inv;
        if err != 0.0 {
            d_depth[r] += w.depth * inv * err.signum();
        }

        let range = fwd.ray_pairs[r].clone();
        let logits: Vec<f64> = fwd.pairs[range.clone()].iter().map(|p| p.logit).collect();
        let (ce, dl) = softmax_cross_entropy(&logits, t.pair)?;
        report.prob += ce * inv;
        for (gi, dli) in g.d_logit[range].iter_mut().zip(dl) {
            *gi += w.prob * inv * dli;
        }

        let (u, v) = fwd.rays[r].pixel;
        ray_at[v * width + u] = r;
        composite.set(u, v, d);
    }

    let mask = &scene.mask_obj;
    let mut valid = Vec::new();
    for (u, v) in mask.pixels() {
        if !normal_defined(&composite, mask, u, v) || !normal_defined(&scene.depth_gt, mask, u, v) {
            continue;
        }
        let touched =
            [(u - 1, v), (u + 1, v), (u, v - 1), (u, v + 1)].iter().any(|&(x, y)| ray_at[y * width + x] != usize::MAX);
        if !touched {
            continue;
        }
        if let (Some(np), Some(nt)) = (normal_at(&composite, k, u, v), normal_at(&scene.depth_gt, k, u, v)) {
            valid.push((u, v, np, nt));
        }
    }
    report.normal_pixels = valid.len();
    if !valid.is_empty() {
        let inv_n = 1.0 / valid.len() as f64;
        let mut d_comp = vec![0.0; width * height];
        for (u, v, np, nt) in &valid {
            report.norm += (1.0 - np.dot(nt)) * inv_n;
            normal_backward(&composite, k, *u, *v, &(-nt * (w.norm * inv_n)), &mut d_comp);
        }
        for (i, &r) in ray_at.iter().enumerate() {
            if r != usize::MAX {
                d_depth[r] += d_comp[i];
            }
        }
    }
    report.total = w.depth * report.depth + w.prob * report.prob + w.norm * report.norm;

    if let Some(grad) = grad {
        for (r, t) in targets.rays.iter().enumerate() {
            if t.is_none() {
                continue;
            }
            let i = fwd.selected(r).expect("supervised rays have pairs");
            g.d_sigma[i] += d_depth[r] * fwd.pairs[i].pair.span() * fwd.rays[r].dir.z;
        }
        backward_scene(model, &fwd, &g, grad)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;
    use crate::testutil::toy_record;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perturbed_model(seed: u64) -> Model {
        let mut m = Model::new(ModelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.params.iter_mut().for_each(|x| *x += rng.random_range(-0.01..0.01));
        m
    }

    #[test]
    fn terms_are_non_negative_and_weighted() {
        let scene = toy_record(1, 32);
        let m = perturbed_model(1);
        let w = LossWeights::default();
        let r = total_loss(&m, &scene, &w, None).unwrap();
        assert!(r.supervised > 0 && r.normal_pixels > 0);
        assert!(r.depth >= 0.0 && r.prob >= 0.0 && r.norm >= 0.0);
        let expect = 200.0 * r.depth + 10.0 * r.prob + 0.5 * r.norm;
        assert!((r.total - expect).abs() < 1e-12);
        let l1 = LossWeights { depth: 1.0, prob: 0.0, norm: 0.0 };
        assert_eq!(total_loss(&m, &scene, &l1, None).unwrap().total, r.depth);
    }

    #[test]
    fn excluded_rays_contribute_no_gradient() {
        let mut scene = toy_record(2, 32);
        // Push every true surface far behind the grid.
        for (u, v) in scene.mask_obj.clone().pixels() {
            scene.depth_gt.set(u, v, 2.5);
        }
        let m = perturbed_model(2);
        let mut g = vec![0.0; m.param_count()];
        let r = total_loss(&m, &scene, &LossWeights::default(), Some(&mut g)).unwrap();
        assert_eq!(r.supervised, 0);
        assert_eq!(r.total, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences_on_a_sample_of_blocks() {
        let scene = toy_record(3, 32);
        let m = perturbed_model(3);
        let w = LossWeights::default();
        let mut g = vec![0.0; m.param_count()];
        total_loss(&m, &scene, &w, Some(&mut g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = 1e-6;
        for name in [
            "encoder.level2.weight",
            "fusion.rgb.weight",
            "voxel.stage1.weight",
            "decoder.offset.0.weight",
            "decoder.prob.2.bias",
        ] {
            let b = m.layout.blocks.iter().find(|b| b.name == name).unwrap();
            for _ in 0..4 {
                let i = b.offset + rng.random_range(0..b.len());
                let mut mp = m.clone();
                mp.params[i] += h;
                let fp = total_loss(&mp, &scene, &w, None).unwrap().total;
                mp.params[i] -= 2.0 * h;
                let fm = total_loss(&mp, &scene, &w, None).unwrap().total;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-4);
                assert!(rel < 1e-4, "{name}[{i}]: {} vs {fd}", g[i]);
            }
        }
    }
}
