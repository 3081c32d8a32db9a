use crate::{CameraIntrinsics, DepthImage, Error, Mask, Result, Vec3};

/// Mean absolute depth error over supervised rays.
pub fn loss_depth(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::NoSupervision);
    }
    Ok(pred.iter().zip(truth).map(|(d, t)| (d - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// `-log softmax(logits)[target]` and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidInput(format!("target pair {target} out of range for {} pairs", logits.len())));
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = m + z.ln() - logits[target];
    let mut g: Vec<f64> = exps.iter().map(|e| e / z).collect();
    g[target] -= 1.0;
    Ok((loss, g))
}

/// Mean per-ray softmax cross-entropy over each ray's pairs.
pub fn loss_prob<L: AsRef<[f64]>>(logits: &[L], targets: &[usize]) -> Result<f64> {
    if logits.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!("{} rays for {} targets", logits.len(), targets.len())));
    }
    if logits.is_empty() {
        return Err(Error::NoSupervision);
    }
    let mut sum = 0.0;
    for (l, &t) in logits.iter().zip(targets) {
        sum += softmax_cross_entropy(l.as_ref(), t)?.0;
    }
    Ok(sum / logits.len() as f64)
}

/// Unit normals on a depth image; `None` where a normal is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<Option<Vec3>>,
}

impl NormalMap {
    pub fn get(&self, u: usize, v: usize) -> Option<Vec3> {
        self.normals[v * self.width + u]
    }
}

/// Left, right, up, down neighbours of an interior pixel.
fn neighbours(u: usize, v: usize) -> [(usize, usize); 4] {
    [(u - 1, v), (u + 1, v), (u, v - 1), (u, v + 1)]
}

/// Whether the normal at `(u, v)` is defined: the pixel and its four
/// neighbours lie in `mask` and the neighbours have positive depth.
pub fn normal_defined(d: &DepthImage, mask: &Mask, u: usize, v: usize) -> bool {
    if u == 0 || v == 0 || u + 1 >= d.width || v + 1 >= d.height || !mask.get(u, v) {
        return false;
    }
    neighbours(u, v).iter().all(|&(x, y)| mask.get(x, y) && d.get(x, y) > 0.0)
}

struct NormalParts {
    a: Vec3,
    b: Vec3,
    c: Vec3,
    sign: f64,
}

fn normal_parts(d: &DepthImage, k: &CameraIntrinsics, u: usize, v: usize) -> NormalParts {
    let p = |(x, y): (usize, usize)| k.pixel_direction(x, y) * d.get(x, y);
    let [l, r, up, dn] = neighbours(u, v);
    let a = p(r) - p(l);
    let b = p(dn) - p(up);
    let c = a.cross(&b);
    let sign = if c.dot(&k.pixel_direction(u, v)) > 0.0 { -1.0 } else { 1.0 };
    NormalParts { a, b, c, sign }
}

/// Normal from central differences of back-projected neighbours,
/// `normalize((p_R - p_L) × (p_D - p_U))`, oriented towards the camera.
pub fn normal_at(d: &DepthImage, k: &CameraIntrinsics, u: usize, v: usize) -> Option<Vec3> {
    let n = normal_parts(d, k, u, v);
    let len = n.c.norm();
    (len > 0.0 && len.is_finite()).then(|| n.c * (n.sign / len))
}

pub fn normals_from_depth(d: &DepthImage, k: &CameraIntrinsics, mask: &Mask) -> NormalMap {
    let mut normals = vec![None; d.width * d.height];
    for (u, v) in mask.pixels() {
        if normal_defined(d, mask, u, v) {
            normals[v * d.width + u] = normal_at(d, k, u, v);
        }
    }
    NormalMap { width: d.width, height: d.height, normals }
}

/// Accumulates into `d_depth` the gradient of `g · normal_at(u, v)` with
/// respect to the four neighbour depths.
pub fn normal_backward(d: &DepthImage, k: &CameraIntrinsics, u: usize, v: usize, g: &Vec3, d_depth: &mut [f64]) {
    let n = normal_parts(d, k, u, v);
    let len = n.c.norm();
    if !(len > 0.0) {
        return;
    }
    let nh = n.c / len;
    let gc = (g - nh * nh.dot(g)) * (n.sign / len);
    let ga = n.b.cross(&gc);
    let gb = gc.cross(&n.a);
    let [l, r, up, dn] = neighbours(u, v);
    let w = d.width;
    let q = |(x, y): (usize, usize)| k.pixel_direction(x, y);
    d_depth[r.1 * w + r.0] += q(r).dot(&ga);
    d_depth[l.1 * w + l.0] -= q(l).dot(&ga);
    d_depth[dn.1 * w + dn.0] += q(dn).dot(&gb);
    d_depth[up.1 * w + up.0] -= q(up).dot(&gb);
}

/// Mean of `1 - n_pred · n_true` over masked pixels where both are defined,
/// with the number of such pixels.
pub fn loss_norm(pred: &NormalMap, truth: &NormalMap, mask: &Mask) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for (u, v) in mask.pixels() {
        if let (Some(a), Some(b)) = (pred.get(u, v), truth.get(u, v)) {
            sum += 1.0 - a.dot(&b);
            n += 1;
        }
    }
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}
