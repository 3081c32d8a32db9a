//! Ray-voxel implicit depth restoration for hand-held transparent objects.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: pinhole camera, back-projection, voxel grids, exact
//!   ray/voxel traversal and the per-ray depth composition.
//! * [`features`]: dense image features, ray/point/voxel/hand features and
//!   the positional embeddings that make up a pair embedding.
//! * [`network`]: the decoder MLPs, the parameter store and the full
//!   forward/reverse pipeline over a scene.
//! * [`training`]: supervision targets, the weighted depth/probability/normal
//!   loss, Adam and the epoch loop.
//! * [`datagen`]: the procedural scene generator (analytic primitives held by
//!   a capsule hand) and depth corruption.
//! * [`metrics`]: masked RMSE/REL/MAE/threshold metrics.
//! * [`handover`]: grasp sampling, rescoring, hand tracking and the
//!   three-phase handover state machine.
//! * [`io`]: tensor/PPM containers, run configuration, checkpoints and the
//!   dataset layout.

// `!(x > 0.0)` forms are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod features;
pub mod geometry;
pub mod handover;
pub mod io;
pub mod metrics;
pub mod network;
pub mod training;

#[cfg(test)]
pub(crate) mod testutil;

pub use datagen::SceneRecord;
pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, DepthImage, Mask, Ray, RayVoxelPair, RgbImage, VoxelGrid};
pub use network::Model;

/// 3-vector in the camera frame (x right, y down, z forward), metres.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix, typically a rotation.
pub type Mat3 = nalgebra::Matrix3<f64>;
