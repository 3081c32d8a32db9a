mod checkpoint;
mod config;
mod dataset;
mod ppm;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_META, CHECKPOINT_PARAMS};
pub(crate) use config::on_off;
pub use config::RunConfig;
pub use dataset::{
    dataset_root_of, load_split, read_manifest, read_scene, scene_dir_name, write_dataset, write_scene, Manifest,
    ManifestEntry, SplitCounts, MANIFEST, SCENES_DIR, SCENE_FILES,
};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use tensor::{
    depth_to_tensor, depth_to_tensor_f64, mask_to_tensor, tensor_to_depth, tensor_to_mask, Tensor, TensorData,
};
