use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ppm::{read_ppm, write_ppm};
use super::tensor::{depth_to_tensor, mask_to_tensor, tensor_to_depth, tensor_to_mask, Tensor};
use crate::datagen::{CorruptionParams, DatasetConfig, GeneratedScene, ObjectKind, Split};
use crate::features::HandKeypoints;
use crate::{CameraIntrinsics, Error, Result, SceneRecord};

pub const MANIFEST: &str = "manifest.json";
pub const SCENES_DIR: &str = "scenes";
pub const SCENE_FILES: [&str; 6] =
    ["rgb.ppm", "depth_raw.rvt", "depth_gt.rvt", "mask_obj.rvt", "mask_hand.rvt", "keypoints.json"];

/// Per-scene manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    /// Scene directory relative to the dataset root.
    pub path: String,
    pub seed: u64,
    pub split: Split,
    pub kind: ObjectKind,
    pub supervised_fraction: f64,
    pub object_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Top-level description of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub intrinsics: CameraIntrinsics,
    pub corruption: CorruptionParams,
    /// Provenance of the corruption statistics.
    pub corruption_note: String,
    pub unknown_category_holdout: bool,
    pub splits: SplitCounts,
    pub scenes: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entries(&self, split: Option<Split>) -> impl Iterator<Item = &ManifestEntry> {
        self.scenes.iter().filter(move |e| split.is_none_or(|s| e.split == s))
    }
}

pub fn scene_dir_name(index: usize) -> String {
    format!("{SCENES_DIR}/{index:06}")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes the six record files of one scene into `dir`.
pub fn write_scene(dir: &Path, rec: &SceneRecord) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_ppm(&dir.join(SCENE_FILES[0]), &rec.rgb)?;
    depth_to_tensor(&rec.depth_raw).write(&dir.join(SCENE_FILES[1]))?;
    depth_to_tensor(&rec.depth_gt).write(&dir.join(SCENE_FILES[2]))?;
    mask_to_tensor(&rec.mask_obj).write(&dir.join(SCENE_FILES[3]))?;
    mask_to_tensor(&rec.mask_hand).write(&dir.join(SCENE_FILES[4]))?;
    write_json(&dir.join(SCENE_FILES[5]), &rec.keypoints)
}

/// Reads one scene; intrinsics come from the dataset manifest.
pub fn read_scene(dir: &Path, intrinsics: &CameraIntrinsics) -> Result<SceneRecord> {
    let rgb = read_ppm(&dir.join(SCENE_FILES[0]))?;
    let depth_raw = tensor_to_depth(&Tensor::read(&dir.join(SCENE_FILES[1]))?)?;
    let depth_gt = tensor_to_depth(&Tensor::read(&dir.join(SCENE_FILES[2]))?)?;
    let mask_obj = tensor_to_mask(&Tensor::read(&dir.join(SCENE_FILES[3]))?)?;
    let mask_hand = tensor_to_mask(&Tensor::read(&dir.join(SCENE_FILES[4]))?)?;
    let keypoints: HandKeypoints = read_json(&dir.join(SCENE_FILES[5]))?;
    let size = (intrinsics.width, intrinsics.height);
    let sizes = [
        (rgb.width, rgb.height),
        (depth_raw.width, depth_raw.height),
        (depth_gt.width, depth_gt.height),
        (mask_obj.width, mask_obj.height),
        (mask_hand.width, mask_hand.height),
    ];
    if sizes.iter().any(|s| *s != size) {
        return Err(Error::DimensionMismatch(format!("{}: record sizes {sizes:?} vs camera {size:?}", dir.display())));
    }
    Ok(SceneRecord { rgb, depth_raw, depth_gt, mask_obj, mask_hand, keypoints, intrinsics: *intrinsics })
}

/// Writes every scene and the manifest under `root`.
pub fn write_dataset(
    root: &Path,
    cfg: &DatasetConfig,
    scenes: &[GeneratedScene],
    config_hash: &str,
) -> Result<Manifest> {
    let first = scenes.first().ok_or_else(|| Error::InvalidInput("no scenes to write".into()))?;
    scenes.par_iter().try_for_each(|s| {
        write_scene(&root.join(scene_dir_name(s.index)), &s.record)
            .map_err(|e| Error::InvalidInput(format!("scene {}: {e}", s.index)))
    })?;
    let count = |sp| scenes.iter().filter(|s| s.split == sp).count();
    let manifest = Manifest {
        config_hash: config_hash.to_string(),
        master_seed: cfg.seed,
        intrinsics: first.record.intrinsics,
        corruption: cfg.distribution.corruption,
        corruption_note: "assumed defaults; not measured sensor statistics".into(),
        unknown_category_holdout: cfg.unknown_category_holdout,
        splits: SplitCounts { train: count(Split::Train), val: count(Split::Val), test: count(Split::Test) },
        scenes: scenes
            .iter()
            .map(|s| ManifestEntry {
                index: s.index,
                path: scene_dir_name(s.index),
                seed: s.seed,
                split: s.split,
                kind: s.kind,
                supervised_fraction: s.supervised_fraction,
                object_pixels: s.record.mask_obj.count(),
            })
            .collect(),
    };
    write_json(&root.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    read_json(&root.join(MANIFEST))
}

/// Records of one split (or all), in index order.
pub fn load_split(root: &Path, manifest: &Manifest, split: Option<Split>) -> Result<Vec<(usize, SceneRecord)>> {
    let entries: Vec<&ManifestEntry> = manifest.entries(split).collect();
    entries.par_iter().map(|e| Ok((e.index, read_scene(&root.join(&e.path), &manifest.intrinsics)?))).collect()
}

/// Dataset root of a scene directory (`root/scenes/NNNNNN`).
pub fn dataset_root_of(scene_dir: &Path) -> Option<PathBuf> {
    scene_dir.parent()?.parent().map(Path::to_path_buf)
}
