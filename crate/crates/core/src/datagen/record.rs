use crate::features::HandKeypoints;
use crate::network::SceneInput;
use crate::{CameraIntrinsics, DepthImage, Mask, RgbImage};

/// One synthetic frame with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub rgb: RgbImage,
    /// Sensor-like depth with the object region corrupted; 0 = missing.
    pub depth_raw: DepthImage,
    pub depth_gt: DepthImage,
    pub mask_obj: Mask,
    pub mask_hand: Mask,
    pub keypoints: HandKeypoints,
    pub intrinsics: CameraIntrinsics,
}

impl SceneRecord {
    /// Network input restoring the object region of the raw depth.
    pub fn input(&self) -> SceneInput<'_> {
        SceneInput {
            rgb: &self.rgb,
            depth: &self.depth_raw,
            intrinsics: &self.intrinsics,
            mask: &self.mask_obj,
            keypoints: &self.keypoints,
        }
    }
}
