mod grasp;
mod sim;
mod tracking;

pub use grasp::{
    estimate_normals, rescore, rotation_angle, sample_grasps, select_grasp, CollisionWorld, Grasp, GripperGeometry,
    RescoreWeights, RigidPose, SamplerConfig, Selection, FINGER_REACH, GRASP_ADVANCE, MAX_GRIPPER_WIDTH,
    MIN_GRASP_POINTS, PREGRASP_STANDOFF,
};
pub use sim::{
    judge_grasp, masked_change, object_cloud, run_benchmark, run_scenario, standard_suite, step, BenchmarkReport,
    Frame, HandMotion, HandoverConfig, HandoverState, ObjectRow, Phase, RestorationBackend, ScenarioOutcome,
    ScenarioScript, ScenarioSet, TrajectoryRecord, BENCHMARK_THRESHOLDS,
};
pub use tracking::{estimate_hand_motion, update_pregrasp};
