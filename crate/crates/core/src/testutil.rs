//! Fixtures shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::HandKeypoints;
use crate::{CameraIntrinsics, DepthImage, Mask, RgbImage, SceneRecord, Vec3};

/// A small synthetic frame: a tilted background plane, a nearer blob on
/// the masked region, random colours and a plausible hand.
pub fn toy_scene(seed: u64, size: usize) -> (RgbImage, DepthImage, CameraIntrinsics, Mask, HandKeypoints) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = CameraIntrinsics::centered(size, size, 1.5625).unwrap();
    let mut depth = DepthImage::zeros(size, size);
    let mut mask = Mask::empty(size, size);
    let c = size as f64 / 2.0;
    for v in 0..size {
        for u in 0..size {
            let (x, y) = (u as f64 - c, v as f64 - c);
            let bg = 1.0 + 0.002 * x;
            if x * x + y * y < (size as f64 / 5.0).powi(2) {
                mask.set(u, v, true);
                let r = rng.random::<f64>();
                let d = if r < 0.3 {
                    0.0
                } else if r < 0.6 {
                    bg
                } else {
                    0.55 + 0.001 * (x * x + y * y).sqrt() + 0.005 * rng.random::<f64>()
                };
                depth.set(u, v, d);
            } else {
                depth.set(u, v, bg);
            }
        }
    }
    let mut rgb = RgbImage::filled(size, size, [0, 0, 0]);
    rgb.data.iter_mut().for_each(|b| *b = rng.random());
    let kp = HandKeypoints::new(
        (0..21)
            .map(|i| {
                let a = i as f64 * 0.3;
                Vec3::new(0.05 + 0.03 * a.cos(), 0.04 + 0.03 * a.sin(), 0.56 + 0.002 * i as f64)
            })
            .collect(),
    )
    .unwrap();
    (rgb, depth, k, mask, kp)
}

/// [`toy_scene`] as a record whose perfect depth is the smooth blob.
pub fn toy_record(seed: u64, size: usize) -> SceneRecord {
    let (rgb, depth_raw, intrinsics, mask_obj, keypoints) = toy_scene(seed, size);
    let c = size as f64 / 2.0;
    let mut depth_gt = depth_raw.clone();
    for (u, v) in mask_obj.pixels() {
        let (x, y) = (u as f64 - c, v as f64 - c);
        depth_gt.set(u, v, 0.55 + 0.001 * (x * x + y * y).sqrt());
    }
    SceneRecord { rgb, depth_raw, depth_gt, mask_hand: Mask::empty(size, size), mask_obj, keypoints, intrinsics }
}
