//! Injecting the true pair and offset into the depth composition reproduces
//! the perfect depth on every supervised ray of generated scenes.

use rayvox_core::datagen::{generate_scene, SpecDistribution};
use rayvox_core::geometry::{
    backproject, build_voxel_grid, compose_depth, pixel_ray, traverse, ScoredPair, DEFAULT_MARGIN, DEFAULT_RESOLUTION,
};
use rayvox_core::training::build_targets;

#[test]
fn injected_truth_composes_to_perfect_depth() {
    let dist = SpecDistribution::default();
    let mut supervised = 0;
    for seed in 0..12u64 {
        let (_, rec) = generate_scene(&dist, None, 1000 + seed).unwrap();
        let k = &rec.intrinsics;
        let cloud = backproject(&rec.depth_raw, k).unwrap();
        let grid = build_voxel_grid(&cloud.points, DEFAULT_RESOLUTION, DEFAULT_MARGIN).unwrap();
        let rays: Vec<_> = rec.mask_obj.pixels().map(|(u, v)| pixel_ray(k, u, v).unwrap()).collect();
        let pairs: Vec<_> = rays.iter().enumerate().map(|(i, r)| traverse(&grid, r, i)).collect();
        let targets = build_targets(&rec.depth_gt, &rays, &pairs);

        let scored: Vec<Vec<ScoredPair>> = pairs
            .iter()
            .zip(&targets.rays)
            .map(|(ps, t)| match t {
                Some(t) => ps
                    .iter()
                    .enumerate()
                    .map(|(j, &pair)| ScoredPair {
                        pair,
                        logit: if j == t.pair { 1.0 } else { -1.0 },
                        offset: if j == t.pair { t.offset } else { 0.5 * pair.span() },
                    })
                    .collect(),
                None => Vec::new(),
            })
            .collect();
        let out = compose_depth(k, &rays, &scored).unwrap();
        for (ray, t) in rays.iter().zip(&targets.rays) {
            let (u, v) = ray.pixel;
            match t {
                Some(_) => {
                    supervised += 1;
                    let err = (out.get(u, v) - rec.depth_gt.get(u, v)).abs();
                    assert!(err <= 1e-6, "pixel ({u}, {v}) off by {err}");
                }
                None => assert_eq!(out.get(u, v), 0.0),
            }
        }
    }
    assert!(supervised > 0);
}
