use crate::{CameraIntrinsics, DepthImage, Error, Ray, RayVoxelPair, Result};

/// A ray/voxel pair with its termination logit and in-voxel offset (metres
/// past the entry point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub pair: RayVoxelPair,
    pub logit: f64,
    pub offset: f64,
}

/// Index of the pair with the largest logit; ties go to the earliest entry.
/// Assumes `pairs` is sorted by `t_in`, as [`crate::geometry::traverse`]
/// returns it.
pub fn select_pair<T>(pairs: &[T], logit: impl Fn(&T) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pairs.iter().enumerate() {
        let l = logit(p);
        match best {
            Some((_, b)) if l <= b => {}
            _ => best = Some((i, l)),
        }
    }
    best.map(|(i, _)| i)
}

/// Per-ray depth from the winning pair: the terminating point is
/// `(t_in + offset) * dir` and the reported depth is its z coordinate.
/// Rays without pairs stay at 0.
pub fn compose_depth(k: &CameraIntrinsics, rays: &[Ray], scored: &[Vec<ScoredPair>]) -> Result<DepthImage> {
    if rays.len() != scored.len() {
        return Err(Error::DimensionMismatch(format!("{} rays but {} pair lists", rays.len(), scored.len())));
    }
    let mut out = DepthImage::zeros(k.width, k.height);
    for (ray, pairs) in rays.iter().zip(scored) {
        for p in pairs {
            if !(p.offset >= 0.0 && p.offset <= p.pair.span()) {
                return Err(Error::InvalidInput(format!("offset {} outside [0, {}]", p.offset, p.pair.span())));
            }
        }
        if let Some(j) = select_pair(pairs, |p| p.logit) {
            let p = &pairs[j];
            out.set(ray.pixel.0, ray.pixel.1, (p.pair.t_in + p.offset) * ray.dir.z);
        }
    }
    Ok(out)
}
