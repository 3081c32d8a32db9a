mod dataset;
mod hand;
mod record;
mod scene;
mod shapes;

pub use dataset::{
    generate_indexed, generate_scenes, scene_seed, split_of, splitmix64, supervised_fraction, DatasetConfig,
    GeneratedScene, Split, SUPERVISION_GRID,
};
pub use hand::{
    hand_capsules, synth_hand, GripParams, DISTAL_JOINTS, FINGERTIPS, HAND_CAPSULE_RADIUS, MAX_GRASP_WIDTH,
};
pub use record::SceneRecord;
pub use scene::{
    build_record, corrupt_depth, generate_scene, render_perfect, sample_spec, sample_spec_of_kind, upright, Background,
    CorruptionParams, DistractorBox, FamilyWeights, ObjectKind, Rendering, SceneSpec, SpecDistribution, DEPTH_RANGE,
};
pub use shapes::{segment_distance, Capsule, Frustum, PlacedObject, Pose, Primitive};
