use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::SceneRecord;
use super::scene::{generate_scene, ObjectKind, SceneSpec, SpecDistribution};
use crate::geometry::{backproject, build_voxel_grid, pixel_ray, traverse, DEFAULT_MARGIN, DEFAULT_RESOLUTION};
use crate::training::build_targets;
use crate::{Error, Result};

/// Grid used when measuring how many rays a scene can supervise; matches
/// the model defaults.
pub const SUPERVISION_GRID: (usize, f64) = (DEFAULT_RESOLUTION, DEFAULT_MARGIN);

/// SplitMix64 output for `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of scene `index` under `master`.
pub fn scene_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Split of scene `index` among `n`: the first `⌊0.7 n⌋` train, the next
/// `⌊0.2 n⌋` validation, the rest test.
pub fn split_of(index: usize, n: usize) -> Split {
    let train = n * 7 / 10;
    let val = n * 2 / 10;
    if index < train {
        Split::Train
    } else if index < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

/// Dataset-level generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub scenes: usize,
    pub seed: u64,
    pub distribution: SpecDistribution,
    /// Draw train/validation scenes from the known families only and test
    /// scenes from the unknown ones.
    pub unknown_category_holdout: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { scenes: 500, seed: 0, distribution: SpecDistribution::default(), unknown_category_holdout: false }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 {
            return Err(Error::Config("a dataset needs at least one scene".into()));
        }
        self.distribution.validate()?;
        if self.unknown_category_holdout {
            for (name, unknown) in [("known", false), ("unknown", true)] {
                self.distribution
                    .families
                    .filtered(|k| k.is_unknown_category() == unknown)
                    .probabilities()
                    .map_err(|_| Error::Config(format!("holdout needs a positive weight on some {name} family")))?;
            }
        }
        Ok(())
    }

    /// Distribution scenes of `split` are drawn from.
    pub fn distribution_for(&self, split: Split) -> SpecDistribution {
        let mut d = self.distribution.clone();
        if self.unknown_category_holdout {
            let unknown = split == Split::Test;
            d.families = d.families.filtered(|k| k.is_unknown_category() == unknown);
        }
        d
    }
}

/// One generated scene with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub index: usize,
    pub seed: u64,
    pub split: Split,
    pub kind: ObjectKind,
    pub spec: SceneSpec,
    pub record: SceneRecord,
    pub supervised_fraction: f64,
}

/// Fraction of object rays whose true surface falls inside an occupied
/// voxel of the grid built from the corrupted depth.
pub fn supervised_fraction(record: &SceneRecord, resolution: usize, margin: f64) -> Result<f64> {
    let k = &record.intrinsics;
    let cloud = backproject(&record.depth_raw, k)?;
    let grid = build_voxel_grid(&cloud.points, resolution, margin)?;
    let mut rays = Vec::new();
    let mut pairs = Vec::new();
    for (i, (u, v)) in record.mask_obj.pixels().enumerate() {
        let ray = pixel_ray(k, u, v)?;
        pairs.push(traverse(&grid, &ray, i));
        rays.push(ray);
    }
    Ok(build_targets(&record.depth_gt, &rays, &pairs).fraction())
}

/// Scene `index` of the dataset.
pub fn generate_indexed(cfg: &DatasetConfig, index: usize) -> Result<GeneratedScene> {
    let seed = scene_seed(cfg.seed, index);
    let split = split_of(index, cfg.scenes);
    let (spec, record) = generate_scene(&cfg.distribution_for(split), None, seed)?;
    let (res, margin) = SUPERVISION_GRID;
    Ok(GeneratedScene {
        index,
        seed,
        split,
        kind: spec.object.shape.kind(),
        supervised_fraction: supervised_fraction(&record, res, margin)?,
        spec,
        record,
    })
}

/// Every scene of the dataset, in index order. Scenes are generated in
/// parallel; each is a pure function of its own seed.
pub fn generate_scenes(cfg: &DatasetConfig) -> Result<Vec<GeneratedScene>> {
    cfg.validate()?;
    (0..cfg.scenes)
        .into_par_iter()
        .map(|i| generate_indexed(cfg, i).map_err(|e| Error::InvalidInput(format!("scene {i}: {e}"))))
        .collect()
}
