//! Fixtures shared by the benchmarks.

use rayvox_core::datagen::{generate_scene, SpecDistribution};
use rayvox_core::SceneRecord;

/// A deterministic generated scene of the given square size.
pub fn bench_scene(size: usize, seed: u64) -> SceneRecord {
    let dist = SpecDistribution { width: size, height: size, ..Default::default() };
    generate_scene(&dist, None, seed).expect("scene generates").1
}
