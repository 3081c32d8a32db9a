//! Camera model, image containers, voxel grids and ray/voxel traversal.

mod camera;
mod compose;
mod grid;
mod image;
mod traverse;

pub use camera::{backproject, pixel_ray, project, CameraIntrinsics, PointCloud, Ray};
pub use compose::{compose_depth, select_pair, ScoredPair};
pub use grid::{build_voxel_grid, VoxelGrid, DEFAULT_MARGIN, DEFAULT_RESOLUTION};
pub use image::{DepthImage, Mask, RgbImage};
pub use traverse::{traverse, traverse_all, RayVoxelPair, ENTRY_NUDGE};
