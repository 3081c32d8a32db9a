use std::f64::consts::PI;
use std::ops::Range;

use crate::{Error, Result, Vec3};

/// Hand keypoint count times three coordinates.
pub const HAND_FEATURE_DIM: usize = 63;

/// Sinusoidal embedding: for each component `c` and octave `k`,
/// `(sin(2^k π c), cos(2^k π c))`, component-major.
pub fn positional_embedding(x: &Vec3, octaves: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(6 * octaves);
    for c in x.iter() {
        let mut f = PI;
        for _ in 0..octaves {
            let (s, co) = (f * c).sin_cos();
            out.push(s);
            out.push(co);
            f *= 2.0;
        }
    }
    out
}

/// Column ranges of each component within a pair embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingLayout {
    pub ray: Range<usize>,
    pub voxel: Range<usize>,
    pub hand_abs: Range<usize>,
    pub hand_rel: Range<usize>,
    pub pe_ray: Range<usize>,
    pub pe_voxel: Range<usize>,
    pub total: usize,
}

impl EmbeddingLayout {
    pub fn new(ray_dim: usize, voxel_dim: usize, octaves: usize) -> Self {
        let pe = 6 * octaves;
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let ray = take(ray_dim);
        let voxel = take(voxel_dim);
        let hand_abs = take(HAND_FEATURE_DIM);
        let hand_rel = take(HAND_FEATURE_DIM);
        let pe_ray = take(pe);
        let pe_voxel = take(pe);
        Self { ray, voxel, hand_abs, hand_rel, pe_ray, pe_voxel, total: at }
    }
}

/// Concatenated per-pair decoder input.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEmbedding {
    pub values: Vec<f64>,
}

impl PairEmbedding {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, r: Range<usize>) -> &[f64] {
        &self.values[r]
    }
}

/// Fixed-order concatenation `ray | voxel | hand | γ(ray) | γ(voxel)` where
/// `hand` is the absolute feature followed by the relative one.
pub fn assemble(
    layout: &EmbeddingLayout,
    ray: &[f64],
    voxel: &[f64],
    hand: &[f64],
    pe_ray: &[f64],
    pe_voxel: &[f64],
) -> Result<PairEmbedding> {
    let parts = [
        ("ray", ray, layout.ray.len()),
        ("voxel", voxel, layout.voxel.len()),
        ("hand", hand, layout.hand_abs.len() + layout.hand_rel.len()),
        ("ray embedding", pe_ray, layout.pe_ray.len()),
        ("voxel embedding", pe_voxel, layout.pe_voxel.len()),
    ];
    let mut values = Vec::with_capacity(layout.total);
    for (name, v, want) in parts {
        if v.len() != want {
            return Err(Error::DimensionMismatch(format!("{name} feature has {} values, expected {want}", v.len())));
        }
        values.extend_from_slice(v);
    }
    Ok(PairEmbedding { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_layout() -> EmbeddingLayout {
        EmbeddingLayout::new(128, 64, 5)
    }

    #[test]
    fn zero_input_embeds_to_sin0_cos1() {
        let e = positional_embedding(&Vec3::zeros(), 5);
        assert_eq!(e.len(), 30);
        for pair in e.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
    }

    #[test]
    fn unit_x_first_octave() {
        let e = positional_embedding(&Vec3::new(1.0, 0.0, 0.0), 5);
        assert!(e[0].abs() < 1e-15);
        assert_eq!(e[1], -1.0);
    }

    #[test]
    fn layout_totals_378() {
        let l = default_layout();
        assert_eq!(l.total, 128 + 64 + 126 + 30 + 30);
        assert_eq!(l.total, 378);
        assert_eq!(l.pe_voxel.end, 378);
    }

    #[test]
    fn zero_parts_assemble_to_zero() {
        let l = default_layout();
        let e = assemble(&l, &[0.0; 128], &[0.0; 64], &[0.0; 126], &[0.0; 30], &[0.0; 30]).unwrap();
        assert_eq!(e.len(), 378);
        assert!(e.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slices_recover_parts() {
        let l = default_layout();
        let ray: Vec<f64> = (0..128).map(|i| i as f64).collect();
        let voxel: Vec<f64> = (0..64).map(|i| -(i as f64)).collect();
        let hand: Vec<f64> = (0..126).map(|i| 0.5 * i as f64).collect();
        let pr: Vec<f64> = (0..30).map(|i| 1e3 + i as f64).collect();
        let pv: Vec<f64> = (0..30).map(|i| 2e3 + i as f64).collect();
        let e = assemble(&l, &ray, &voxel, &hand, &pr, &pv).unwrap();
        assert_eq!(e.slice(l.ray.clone()), &ray[..]);
        assert_eq!(e.slice(l.voxel.clone()), &voxel[..]);
        assert_eq!(e.slice(l.hand_abs.clone()), &hand[..63]);
        assert_eq!(e.slice(l.hand_rel.clone()), &hand[63..]);
        assert_eq!(e.slice(l.pe_ray.clone()), &pr[..]);
        assert_eq!(e.slice(l.pe_voxel.clone()), &pv[..]);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let l = default_layout();
        assert!(assemble(&l, &[0.0; 127], &[0.0; 64], &[0.0; 126], &[0.0; 30], &[0.0; 30]).is_err());
        assert!(assemble(&l, &[0.0; 128], &[0.0; 64], &[0.0; 63], &[0.0; 30], &[0.0; 30]).is_err());
    }
}
