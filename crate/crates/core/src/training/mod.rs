//! Supervision targets, the weighted depth/termination/normal objective,
//! Adam and the epoch loop.

mod adam;
mod losses;
mod objective;
mod targets;
mod trainer;

pub use adam::{adam_step, scheduled_lr, AdamState};
pub use losses::{
    loss_depth, loss_norm, loss_prob, normal_at, normal_backward, normal_defined, normals_from_depth,
    softmax_cross_entropy, NormalMap,
};
pub use objective::{ray_pair_lists, scene_targets, total_loss, LossReport, LossWeights};
pub use targets::{build_targets, RayTarget, SupervisionTarget};
pub use trainer::{train, EpochLog, TrainConfig, TrainOutput};
