//! Bilinear resampling of HWC maps (half-pixel centres, edge clamped) and
//! its adjoint.

struct Taps {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f64>,
}

fn taps(src: usize, dst: usize) -> Taps {
    let scale = src as f64 / dst as f64;
    let mut t = Taps { lo: Vec::with_capacity(dst), hi: Vec::with_capacity(dst), frac: Vec::with_capacity(dst) };
    for i in 0..dst {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = s.floor() as usize;
        t.lo.push(lo);
        t.hi.push((lo + 1).min(src - 1));
        t.frac.push(s - lo as f64);
    }
    t
}

pub fn resize_bilinear(src: &[f64], sh: usize, sw: usize, c: usize, dh: usize, dw: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), sh * sw * c);
    let ty = taps(sh, dh);
    let tx = taps(sw, dw);
    let mut out = vec![0.0; dh * dw * c];
    for y in 0..dh {
        let (y0, y1, fy) = (ty.lo[y], ty.hi[y], ty.frac[y]);
        for x in 0..dw {
            let (x0, x1, fx) = (tx.lo[x], tx.hi[x], tx.frac[x]);
            let w = [(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx];
            let idx = [(y0 * sw + x0) * c, (y0 * sw + x1) * c, (y1 * sw + x0) * c, (y1 * sw + x1) * c];
            let o = &mut out[(y * dw + x) * c..(y * dw + x + 1) * c];
            for (k, ov) in o.iter_mut().enumerate() {
                *ov = w[0] * src[idx[0] + k] + w[1] * src[idx[1] + k] + w[2] * src[idx[2] + k] + w[3] * src[idx[3] + k];
            }
        }
    }
    out
}

/// Accumulates the transpose of [`resize_bilinear`] applied to `d_dst` into
/// `d_src`.
pub fn resize_bilinear_adjoint(d_dst: &[f64], sh: usize, sw: usize, c: usize, dh: usize, dw: usize, d_src: &mut [f64]) {
    debug_assert_eq!(d_dst.len(), dh * dw * c);
    debug_assert_eq!(d_src.len(), sh * sw * c);
    let ty = taps(sh, dh);
    let tx = taps(sw, dw);
    for y in 0..dh {
        let (y0, y1, fy) = (ty.lo[y], ty.hi[y], ty.frac[y]);
        for x in 0..dw {
            let (x0, x1, fx) = (tx.lo[x], tx.hi[x], tx.frac[x]);
            let w = [(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx];
            let idx = [(y0 * sw + x0) * c, (y0 * sw + x1) * c, (y1 * sw + x0) * c, (y1 * sw + x1) * c];
            let g = &d_dst[(y * dw + x) * c..(y * dw + x + 1) * c];
            for (j, &base) in idx.iter().enumerate() {
                if w[j] == 0.0 {
                    continue;
                }
                for (k, gv) in g.iter().enumerate() {
                    d_src[base + k] += w[j] * gv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_size_is_identity() {
        let src: Vec<f64> = (0..2 * 3 * 2).map(|i| i as f64 * 0.7 - 1.0).collect();
        assert_eq!(resize_bilinear(&src, 2, 3, 2, 2, 3), src);
    }

    #[test]
    fn constant_maps_stay_constant() {
        let src = vec![0.375; 4 * 4 * 3];
        let out = resize_bilinear(&src, 4, 4, 3, 16, 16);
        assert!(out.iter().all(|&v| (v - 0.375).abs() < 1e-15));
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (sh, sw, c, dh, dw) = (3, 5, 2, 12, 20);
        let x: Vec<f64> = (0..sh * sw * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dh * dw * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = resize_bilinear(&x, sh, sw, c, dh, dw);
        let mut aty = vec![0.0; x.len()];
        resize_bilinear_adjoint(&y, sh, sw, c, dh, dw, &mut aty);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
