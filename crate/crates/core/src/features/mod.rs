//! Everything that feeds a pair embedding: dense image features, ray
//! features, fused point features, voxel features, hand features and
//! positional embeddings.

mod embedding;
mod encoder;
mod fusion;
mod hand;
mod resize;
mod roi;
mod voxel;

pub use embedding::{assemble, positional_embedding, EmbeddingLayout, PairEmbedding, HAND_FEATURE_DIM};
pub use encoder::{encode_image, encode_image_backward, DenseFeatureMap, EncoderTape};
pub use fusion::{fuse_point_features, fuse_point_features_backward, FusionTape};
pub use hand::{
    hand_abs_feature, hand_frame, hand_rel_feature, HandKeypoints, HAND_BONES, INDEX_MCP, KEYPOINT_COUNT,
    MAX_HAND_SPAN, MIDDLE_MCP, WRIST,
};
pub use resize::{resize_bilinear, resize_bilinear_adjoint};
pub use roi::{roi_ray_feature, roi_ray_feature_backward, ROI_CELLS, ROI_WINDOW};
pub use voxel::{encode_voxel, encode_voxels, encode_voxels_backward, VoxelTape};
