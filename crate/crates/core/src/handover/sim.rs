use std::f64::consts::PI;

use nalgebra::{Rotation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grasp::{
    estimate_normals, sample_grasps, select_grasp, CollisionWorld, Grasp, GripperGeometry, RescoreWeights, RigidPose,
    SamplerConfig, Selection, FINGER_REACH, GRASP_ADVANCE,
};
use super::tracking::{estimate_hand_motion, update_pregrasp};
use crate::datagen::{build_record, hand_capsules, segment_distance, Capsule, ObjectKind, PlacedObject, SceneSpec};
use crate::features::HandKeypoints;
use crate::network::restore;
use crate::{DepthImage, Error, Mask, Mat3, Model, Result, SceneRecord, Vec3};

/// Where restored depth comes from.
#[derive(Debug, Clone, Copy)]
pub enum RestorationBackend<'a> {
    /// Perfect depth on the object mask.
    Oracle,
    /// The corrupted sensor depth, unchanged.
    Passthrough,
    Model(&'a Model),
}

impl RestorationBackend<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            RestorationBackend::Oracle => "oracle",
            RestorationBackend::Passthrough => "passthrough",
            RestorationBackend::Model(_) => "model",
        }
    }

    pub fn restore(&self, rec: &SceneRecord) -> Result<DepthImage> {
        match self {
            RestorationBackend::Oracle => {
                let mut d = rec.depth_raw.clone();
                for (u, v) in rec.mask_obj.pixels() {
                    d.set(u, v, rec.depth_gt.get(u, v));
                }
                Ok(d)
            }
            RestorationBackend::Passthrough => Ok(rec.depth_raw.clone()),
            RestorationBackend::Model(m) => Ok(restore(m, &rec.input())?.depth),
        }
    }
}

/// Settings shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandoverConfig {
    pub sampler: SamplerConfig,
    pub gripper: GripperGeometry,
    pub weights: RescoreWeights,
    /// Candidates requested from the sampler.
    pub candidates: usize,
    /// Consecutive stable restorations needed before grasp selection.
    pub stable_frames: usize,
    /// Largest masked RMSE change between frames that counts as stable.
    pub stability_tolerance: f64,
    /// Pre-grasp reached within this distance and angle (degrees).
    pub reach_distance: f64,
    pub reach_angle_deg: f64,
    /// Standard deviation of the detected keypoints, metres.
    pub keypoint_noise: f64,
    /// Robot base position in the camera frame; grasps approach from it.
    pub robot: Vec3,
    /// Gripper tool pose at the start of every scenario.
    pub home: RigidPose,
    /// Angular speed limit of the gripper, radians per tick.
    pub max_turn: f64,
    /// Shortest object chord between the jaws that counts as a hold.
    pub min_contact_chord: f64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            gripper: GripperGeometry::default(),
            weights: RescoreWeights::default(),
            candidates: 64,
            stable_frames: 3,
            stability_tolerance: 0.005,
            reach_distance: 0.005,
            reach_angle_deg: 2.0,
            keypoint_noise: 0.0,
            robot: Vec3::zeros(),
            home: RigidPose { rotation: Mat3::identity(), translation: Vec3::new(0.0, 0.0, 0.1) },
            max_turn: 0.15,
            min_contact_chord: 0.002,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.candidates > 0
            && self.stable_frames > 0
            && self.stability_tolerance > 0.0
            && self.reach_distance > 0.0
            && self.reach_angle_deg > 0.0
            && self.keypoint_noise >= 0.0
            && self.max_turn > 0.0
            && self.sampler.friction_cone_deg > 0.0
            && self.sampler.friction_cone_deg < 90.0
            && self.sampler.normal_neighbours >= 3;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid handover settings {self:?}")))
        }
    }
}

/// Rigid motion of the hand (and the object it holds) over a tick range:
/// each tick rotates by `rotation` (axis-angle, radians) about the current
/// wrist and then translates by `translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandMotion {
    pub start_tick: usize,
    pub ticks: usize,
    pub translation: Vec3,
    pub rotation: Vec3,
}

/// One scripted handover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    pub scene: SceneSpec,
    #[serde(default)]
    pub motions: Vec<HandMotion>,
    pub robot_to_human: Vec3,
    pub gravity: Vec3,
    pub tick_rate_hz: f64,
    /// Gripper speed limit, metres per tick.
    pub max_speed: f64,
    pub max_ticks: usize,
    pub seed: u64,
}

impl ScenarioScript {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(&self.robot_to_human, "robot_to_human"), (&self.gravity, "gravity")] {
            if (v.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!("{}: {name} must be a unit vector", self.name)));
            }
        }
        if !(self.tick_rate_hz > 0.0 && self.max_speed > 0.0 && self.max_ticks > 0) {
            return Err(Error::Config(format!("{}: rates and budgets must be positive", self.name)));
        }
        if self.scene.hand.is_none() {
            return Err(Error::Config(format!("{}: a handover needs a hand", self.name)));
        }
        self.scene.validate()
    }

    pub fn kind(&self) -> ObjectKind {
        self.scene.object.shape.kind()
    }

    /// Scene at `tick` with every motion up to (not including) it applied.
    pub fn scene_at(&self, tick: usize) -> Result<SceneSpec> {
        let mut spec = self.scene.clone();
        let grip = spec.hand.ok_or_else(|| Error::Config("scenario without a hand".into()))?;
        for k in 0..tick {
            for m in self.motions.iter().filter(|m| k >= m.start_tick && k < m.start_tick + m.ticks) {
                let wrist = crate::datagen::synth_hand(&spec.object, &grip)?.wrist();
                let r = Rotation3::new(m.rotation);
                let pose = &mut spec.object.pose;
                pose.rotation = r * pose.rotation;
                pose.center = r * (pose.center - wrist) + wrist + m.translation;
            }
        }
        Ok(spec)
    }
}

/// A scenario file: the suite plus shared settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub scenarios: Vec<ScenarioScript>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    WaitObserve,
    ApproachReact,
    GraspRetrieve,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }

    /// Whether `self -> next` is allowed.
    pub fn can_become(self, next: Phase) -> bool {
        use Phase::*;
        self == next
            || matches!(
                (self, next),
                (WaitObserve, ApproachReact)
                    | (WaitObserve, Failed)
                    | (ApproachReact, GraspRetrieve)
                    | (ApproachReact, Failed)
                    | (GraspRetrieve, Done)
                    | (GraspRetrieve, Failed)
            )
    }
}

/// Everything the controller carries between ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverState {
    pub phase: Phase,
    pub gripper: RigidPose,
    pub selection: Option<Selection>,
    pub initial_keypoints: Option<HandKeypoints>,
    pub current_keypoints: Option<HandKeypoints>,
    pub tick: usize,
    pub stable: usize,
    /// Open-loop closing pose, fixed on entering the grasp phase.
    pub grasp_target: Option<RigidPose>,
    pub reason: Option<String>,
    #[serde(skip)]
    last_restored: Option<DepthImage>,
}

impl HandoverState {
    pub fn new(home: RigidPose) -> Self {
        Self {
            phase: Phase::WaitObserve,
            gripper: home,
            selection: None,
            initial_keypoints: None,
            current_keypoints: None,
            tick: 0,
            stable: 0,
            grasp_target: None,
            reason: None,
            last_restored: None,
        }
    }

    fn fail(&mut self, reason: &str) {
        self.phase = Phase::Failed;
        self.reason = Some(reason.to_string());
    }
}

/// What the robot observes at one tick, plus the ground truth used to
/// judge the grasp.
pub struct Frame {
    pub record: SceneRecord,
    pub keypoints: HandKeypoints,
    pub object: PlacedObject,
    pub world: CollisionWorld,
    pub true_hand: Vec<Capsule>,
}

impl Frame {
    pub fn build(script: &ScenarioScript, tick: usize, cfg: &HandoverConfig) -> Result<Self> {
        let spec = script.scene_at(tick)?;
        let record = build_record(&spec)?;
        let mut keypoints = record.keypoints.clone();
        if cfg.keypoint_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(script.seed ^ (tick as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let n = Normal::new(0.0, cfg.keypoint_noise).map_err(|e| Error::Config(e.to_string()))?;
            let noisy = keypoints.points().iter().map(|p| p + Vec3::from_fn(|_, _| n.sample(&mut rng))).collect();
            keypoints = HandKeypoints::new(noisy)?;
        }
        let bg = &spec.background;
        let world = CollisionWorld {
            hand: hand_capsules(&keypoints),
            boxes: bg
                .distractors
                .iter()
                .map(|b| PlacedObject {
                    shape: crate::datagen::Primitive::Box {
                        half_x: b.half_extent.x,
                        half_z: b.half_extent.z,
                        height: 2.0 * b.half_extent.y,
                    },
                    pose: crate::datagen::Pose {
                        rotation: *Rotation3::from_axis_angle(&Vec3::y_axis(), b.yaw).matrix(),
                        center: b.center,
                    },
                })
                .collect(),
            plane: Some((bg.depth, bg.slope_x, bg.slope_y)),
        };
        Ok(Self { true_hand: hand_capsules(&record.keypoints), keypoints, object: spec.object, world, record })
    }
}

/// RMSE between two depth maps over mask pixels valid in both; `None`
/// when no pixel qualifies.
pub fn masked_change(a: &DepthImage, b: &DepthImage, mask: &Mask) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (u, v) in mask.pixels() {
        let (x, y) = (a.get(u, v), b.get(u, v));
        if x > 0.0 && y > 0.0 {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Depth jump across an image edge that marks an occluding contour.
const CONTOUR_JUMP: f64 = 0.02;

/// Smallest length of a summed set of outward directions, relative to
/// their count, for the contour direction to be trusted.
const CONTOUR_COHERENCE: f64 = 0.6;

/// Half-width of the window that estimates the outward image direction on
/// the occluding contour.
const CONTOUR_WINDOW: i64 = 2;

/// Object points from restored depth with outward normals.
///
/// Normals are plane fits over nearest neighbours, facing the camera. On
/// the occluding contour (a mask pixel next to something farther away or
/// missing) the surface normal is perpendicular to the viewing ray and
/// points out of the silhouette, so it is taken from the image direction
/// towards the outside pixels instead. Contour points without a consistent
/// outward direction (slivers a pixel or two wide) get a zero normal, which
/// no grasp accepts.
pub fn object_cloud(
    depth: &DepthImage,
    mask: &Mask,
    k: &crate::CameraIntrinsics,
    neighbours: usize,
) -> (Vec<Vec3>, Vec<Vec3>) {
    let (w, h) = (depth.width as i64, depth.height as i64);
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    let mut raw = std::collections::HashMap::new();
    for (u, v) in mask.pixels() {
        let z = depth.get(u, v);
        if z <= 0.0 {
            continue;
        }
        points.push(k.pixel_direction(u, v) * z);
        pixels.push((u as i64, v as i64));
        let outside = |nu: i64, nv: i64| {
            if nu < 0 || nv < 0 || nu >= w || nv >= h {
                return false;
            }
            let (nu, nv) = (nu as usize, nv as usize);
            let nz = depth.get(nu, nv);
            !mask.get(nu, nv) && (nz == 0.0 || nz > z + CONTOUR_JUMP)
        };
        let (iu, iv) = (u as i64, v as i64);
        if [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|(du, dv)| outside(iu + du, iv + dv)) {
            let (mut g, mut total) = ((0.0, 0.0), 0.0);
            for dv in -CONTOUR_WINDOW..=CONTOUR_WINDOW {
                for du in -CONTOUR_WINDOW..=CONTOUR_WINDOW {
                    if outside(iu + du, iv + dv) {
                        g.0 += du as f64;
                        g.1 += dv as f64;
                        total += f64::hypot(du as f64, dv as f64);
                    }
                }
            }
            let len = f64::hypot(g.0, g.1);
            // Outside on opposite sides (a sliver) gives no usable direction.
            let coherent = len >= CONTOUR_COHERENCE * total;
            raw.insert((iu, iv), (len > 0.0 && coherent).then(|| (g.0 / len, g.1 / len)));
        }
    }
    // Average the unit directions along the contour to damp pixel steps.
    let outward: Vec<Option<Option<(f64, f64)>>> = pixels
        .iter()
        .map(|&(iu, iv)| {
            let own = raw.get(&(iu, iv))?;
            let (mut g, mut count) = ((0.0, 0.0), 0.0);
            for dv in -CONTOUR_WINDOW..=CONTOUR_WINDOW {
                for du in -CONTOUR_WINDOW..=CONTOUR_WINDOW {
                    match raw.get(&(iu + du, iv + dv)) {
                        Some(Some((a, b))) => {
                            g.0 += a;
                            g.1 += b;
                            count += 1.0;
                        }
                        Some(None) => count += 1.0,
                        None => {}
                    }
                }
            }
            let agreed = own.is_some() && f64::hypot(g.0, g.1) >= CONTOUR_COHERENCE * count;
            Some(agreed.then_some(g))
        })
        .collect();
    let mut normals = estimate_normals(&points, neighbours, &Vec3::zeros());
    for ((n, p), g) in normals.iter_mut().zip(&points).zip(&outward) {
        let Some(g) = g else { continue };
        *n = Vec3::zeros();
        if let Some((gu, gv)) = g {
            // Normal of the plane through the camera and the contour tangent.
            let step = Vec3::new(gu / k.fx, gv / k.fy, 0.0);
            let tangent = Vec3::new(-step.y, step.x, 0.0);
            let m = tangent.cross(p);
            if m.norm() > 1e-12 {
                *n = if m.dot(&step) >= 0.0 { m.normalize() } else { -m.normalize() };
            }
        }
    }
    (points, normals)
}

/// Grasp outcome judged against the true scene at closure: the closing
/// line must cross the object between the open jaws, and neither the
/// fingers nor the closing line may touch the hand.
pub fn judge_grasp(
    tool: &RigidPose,
    grasp: &Grasp,
    frame: &Frame,
    cfg: &HandoverConfig,
) -> std::result::Result<(), &'static str> {
    let z = tool.axis(2);
    let y = tool.axis(1);
    let c = tool.translation + z * FINGER_REACH;
    let half = cfg.gripper.opening(grasp) / 2.0;
    let (a, b) = (c - y * half, c + y * half);
    let obj = &frame.object;
    if obj.contains(&a) || obj.contains(&b) {
        return Err("jaw lands inside the object");
    }
    let enter = obj.intersect(&a, &y).map(|h| h.0).filter(|t| *t <= 2.0 * half);
    let exit = obj.intersect(&b, &(-y)).map(|h| h.0).filter(|t| *t <= 2.0 * half);
    let chord = match (enter, exit) {
        (Some(t0), Some(t1)) => 2.0 * half - t0 - t1,
        _ => return Err("geometric miss"),
    };
    if chord < cfg.min_contact_chord {
        return Err("geometric miss");
    }
    let r = cfg.gripper.finger_radius;
    let fingers = [(a, a - z * cfg.gripper.finger_length), (b, b - z * cfg.gripper.finger_length), (a, b)];
    let touches =
        fingers.iter().any(|(p, q)| frame.true_hand.iter().any(|h| segment_distance(p, q, &h.a, &h.b) < h.radius + r));
    if touches {
        return Err("hand contact");
    }
    Ok(())
}

/// Moves `from` towards `to` by at most `max_step` metres and `max_turn`
/// radians.
fn move_towards(from: &RigidPose, to: &RigidPose, max_step: f64, max_turn: f64) -> RigidPose {
    let d = to.translation - from.translation;
    let translation = if d.norm() <= max_step { to.translation } else { from.translation + d * (max_step / d.norm()) };
    let q0 = UnitQuaternion::from_matrix(&from.rotation);
    let q1 = UnitQuaternion::from_matrix(&to.rotation);
    let angle = q0.angle_to(&q1);
    let q = if angle <= max_turn { q1 } else { q0.slerp(&q1, max_turn / angle) };
    RigidPose { rotation: *q.to_rotation_matrix().matrix(), translation }
}

/// Advances the controller by one tick on `frame`.
pub fn step(
    state: &HandoverState,
    frame: &Frame,
    script: &ScenarioScript,
    backend: &RestorationBackend,
    cfg: &HandoverConfig,
) -> Result<HandoverState> {
    let mut s = state.clone();
    s.current_keypoints = Some(frame.keypoints.clone());
    match state.phase {
        Phase::Done | Phase::Failed => return Ok(s),
        Phase::WaitObserve => {
            let restored = backend.restore(&frame.record)?;
            let change =
                s.last_restored.as_ref().and_then(|prev| masked_change(prev, &restored, &frame.record.mask_obj));
            s.stable = if change.is_some_and(|c| c < cfg.stability_tolerance) { s.stable + 1 } else { 0 };
            if s.stable >= cfg.stable_frames {
                let (points, normals) = object_cloud(
                    &restored,
                    &frame.record.mask_obj,
                    &frame.record.intrinsics,
                    cfg.sampler.normal_neighbours,
                );
                let grasps = sample_grasps(&points, &normals, cfg.candidates, &cfg.robot, &cfg.sampler, script.seed)?;
                let sel = select_grasp(
                    &grasps,
                    &frame.world,
                    &cfg.gripper,
                    &script.robot_to_human,
                    &script.gravity,
                    &cfg.weights,
                )?;
                match sel {
                    Some(sel) => {
                        s.selection = Some(sel);
                        s.initial_keypoints = Some(frame.keypoints.clone());
                        s.phase = Phase::ApproachReact;
                    }
                    None => s.fail("no feasible grasp"),
                }
            }
            s.last_restored = Some(restored);
        }
        Phase::ApproachReact => {
            let sel = s.selection.expect("selected before approach");
            let initial = s.initial_keypoints.as_ref().expect("recorded before approach");
            let (r, t) = estimate_hand_motion(initial, &frame.keypoints)?;
            let target = update_pregrasp(&sel.pregrasp, &r, &t, &initial.wrist());
            s.gripper = move_towards(&s.gripper, &target, script.max_speed, cfg.max_turn);
            let (dt, da) = s.gripper.distance_to(&target);
            if dt < cfg.reach_distance && da < cfg.reach_angle_deg.to_radians() {
                s.grasp_target = Some(target.along_z(GRASP_ADVANCE));
                s.phase = Phase::GraspRetrieve;
            }
        }
        Phase::GraspRetrieve => {
            let target = s.grasp_target.expect("set on entering the grasp phase");
            s.gripper = move_towards(&s.gripper, &target, script.max_speed, cfg.max_turn);
            if s.gripper.distance_to(&target).0 < 1e-12 {
                let grasp = s.selection.expect("selected").grasp;
                match judge_grasp(&s.gripper, &grasp, frame, cfg) {
                    Ok(()) => s.phase = Phase::Done,
                    Err(reason) => s.fail(reason),
                }
            }
        }
    }
    debug_assert!(state.phase.can_become(s.phase));
    s.tick += 1;
    if !s.phase.is_terminal() && s.tick >= script.max_ticks {
        s.fail("timeout");
    }
    Ok(s)
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tick: usize,
    pub phase: Phase,
    pub gripper: RigidPose,
    pub keypoints: HandKeypoints,
    pub grasp: Option<Grasp>,
    pub reason: Option<String>,
}

/// Final state of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub kind: ObjectKind,
    pub success: bool,
    pub phase: Phase,
    pub reason: Option<String>,
    pub ticks: usize,
}

/// Runs a scenario to completion.
pub fn run_scenario(
    script: &ScenarioScript,
    backend: &RestorationBackend,
    cfg: &HandoverConfig,
) -> Result<(ScenarioOutcome, Vec<TrajectoryRecord>)> {
    script.validate()?;
    cfg.validate()?;
    let mut state = HandoverState::new(cfg.home);
    let mut trajectory = Vec::new();
    while !state.phase.is_terminal() {
        let frame = Frame::build(script, state.tick, cfg)?;
        state = match step(&state, &frame, script, backend, cfg) {
            Ok(s) => s,
            Err(Error::DegenerateHandConfiguration) => {
                let mut s = state.clone();
                s.tick += 1;
                s.fail("degenerate hand configuration");
                s
            }
            Err(e) => return Err(e),
        };
        trajectory.push(TrajectoryRecord {
            tick: state.tick - 1,
            phase: state.phase,
            gripper: state.gripper,
            keypoints: frame.keypoints,
            grasp: state.selection.map(|s| s.grasp),
            reason: state.reason.clone(),
        });
    }
    Ok((
        ScenarioOutcome {
            name: script.name.clone(),
            kind: script.kind(),
            success: state.phase == Phase::Done,
            phase: state.phase,
            reason: state.reason,
            ticks: state.tick,
        },
        trajectory,
    ))
}

/// Success counts of one object family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub kind: ObjectKind,
    pub attempts: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Per-object success table with threshold columns: `objects_at_least[i]`
/// counts objects whose success rate reaches `BENCHMARK_THRESHOLDS[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub backend: String,
    pub rows: Vec<ObjectRow>,
    pub attempts: usize,
    pub successes: usize,
    pub rate: f64,
    pub objects_at_least: [usize; 3],
    pub outcomes: Vec<ScenarioOutcome>,
}

pub const BENCHMARK_THRESHOLDS: [f64; 3] = [0.5, 0.8, 1.0];

impl BenchmarkReport {
    pub fn from_outcomes(backend: &str, outcomes: Vec<ScenarioOutcome>) -> Self {
        let mut rows: Vec<ObjectRow> = Vec::new();
        for o in &outcomes {
            let row = match rows.iter_mut().find(|r| r.kind == o.kind) {
                Some(r) => r,
                None => {
                    rows.push(ObjectRow { kind: o.kind, attempts: 0, successes: 0, rate: 0.0 });
                    rows.last_mut().expect("pushed")
                }
            };
            row.attempts += 1;
            row.successes += o.success as usize;
        }
        rows.sort_by_key(|r| r.kind);
        for r in &mut rows {
            r.rate = r.successes as f64 / r.attempts as f64;
        }
        let attempts = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.success).count();
        let objects_at_least = BENCHMARK_THRESHOLDS.map(|t| rows.iter().filter(|r| r.rate >= t).count());
        Self {
            backend: backend.to_string(),
            rows,
            attempts,
            successes,
            rate: if attempts == 0 { 0.0 } else { successes as f64 / attempts as f64 },
            objects_at_least,
            outcomes,
        }
    }

    /// Aligned text table: one row per object family plus the totals.
    pub fn table(&self) -> String {
        let mut s = format!("{:<12} {:>9} {:>9} {:>8}\n", "object", "attempts", "success", "rate");
        for r in &self.rows {
            s += &format!(
                "{:<12} {:>9} {:>9} {:>7.1}%\n",
                serde_json::to_value(r.kind).expect("kind").as_str().unwrap_or("?"),
                r.attempts,
                r.successes,
                100.0 * r.rate
            );
        }
        s += &format!("{:<12} {:>9} {:>9} {:>7.1}%\n", "all", self.attempts, self.successes, 100.0 * self.rate);
        s += &format!(
            "objects at rate >= 0.5: {}  >= 0.8: {}  >= 1.0: {}\n",
            self.objects_at_least[0], self.objects_at_least[1], self.objects_at_least[2]
        );
        s
    }
}

/// Runs every scenario (in parallel) and tabulates the outcomes.
pub fn run_benchmark(
    scenarios: &[ScenarioScript],
    backend: &RestorationBackend,
    cfg: &HandoverConfig,
) -> Result<(BenchmarkReport, Vec<Vec<TrajectoryRecord>>)> {
    let runs: Vec<(ScenarioOutcome, Vec<TrajectoryRecord>)> =
        scenarios.par_iter().map(|s| run_scenario(s, backend, cfg)).collect::<Result<_>>()?;
    let (outcomes, trajectories): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok((BenchmarkReport::from_outcomes(backend.name(), outcomes), trajectories))
}

/// Grips of the standard suite: wrist direction from the object in the
/// camera's x-z plane (radians from +x towards +z, so `PI / 2` is straight
/// behind the object) and grip height fraction. The palm sits behind or
/// beside the object so the front stays in view, as when holding it out.
const SUITE_GRIPS: [(f64, f64); 6] = [
    (3.0 * PI / 8.0, 0.0),
    (PI / 2.0, 0.2),
    (5.0 * PI / 8.0, 0.1),
    (3.0 * PI / 4.0, 0.0),
    (7.0 * PI / 8.0, 0.2),
    (PI, 0.1),
];

/// Scenarios of the standard suite that move the hand mid-approach.
const SUITE_MOVING: [usize; 2] = [8, 21];

/// The standard suite: every object family held six ways, two of the runs
/// moving the hand during the approach.
pub fn standard_suite(seed: u64) -> Result<Vec<ScenarioScript>> {
    let dist = crate::datagen::SpecDistribution { width: 96, height: 96, ..Default::default() };
    let mut out = Vec::new();
    for kind in ObjectKind::ALL {
        for (g, (azimuth, height)) in SUITE_GRIPS.iter().enumerate() {
            let index = out.len();
            let mut rng = ChaCha8Rng::seed_from_u64(crate::datagen::scene_seed(seed, index));
            let mut scene = crate::datagen::sample_spec_of_kind(&dist, kind, &mut rng)?;
            // Grip angle whose wrist direction faces `azimuth` in the camera frame.
            let local = scene.object.pose.rotation.transpose() * Vec3::new(azimuth.cos(), 0.0, azimuth.sin());
            let grip = scene.hand.as_mut().expect("sampled with a hand");
            grip.angle = local.z.atan2(local.x);
            grip.height = *height;
            let motions = if SUITE_MOVING.contains(&index) {
                vec![HandMotion {
                    start_tick: 6,
                    ticks: 10,
                    translation: Vec3::new(0.005, -0.002, 0.0),
                    rotation: Vec3::new(0.0, 0.01, 0.0),
                }]
            } else {
                Vec::new()
            };
            out.push(ScenarioScript {
                name: format!("{}-grip{g}", serde_json::to_value(kind)?.as_str().unwrap_or("object")),
                scene,
                motions,
                robot_to_human: Vec3::z(),
                gravity: Vec3::y(),
                tick_rate_hz: 10.0,
                max_speed: 0.02,
                max_ticks: 120,
                seed: rng.random(),
            });
        }
    }
    Ok(out)
}
