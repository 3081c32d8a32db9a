use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{segment_distance, Capsule, PlacedObject};
use crate::{Error, Mat3, Result, Vec3};

/// Largest jaw opening, metres.
pub const MAX_GRIPPER_WIDTH: f64 = 0.1;
/// Retreat of the pre-grasp from the grasp along the approach axis.
pub const PREGRASP_STANDOFF: f64 = 0.10;
/// Open-loop advance from the pre-grasp before closing.
pub const GRASP_ADVANCE: f64 = 0.05;
/// Distance from the tool point to the centre of the closing region along
/// the approach axis, so closing happens `PREGRASP_STANDOFF - GRASP_ADVANCE`
/// short of the tool point the grasp names.
pub const FINGER_REACH: f64 = PREGRASP_STANDOFF - GRASP_ADVANCE;

/// Rigid pose: rotation columns are the frame's axes in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.rotation.column(i).into()
    }

    /// Same orientation, moved by `d` along the frame's own z-axis.
    pub fn along_z(&self, d: f64) -> Self {
        Self { rotation: self.rotation, translation: self.translation + self.axis(2) * d }
    }

    /// Translation distance and rotation angle (radians) to `o`.
    pub fn distance_to(&self, o: &RigidPose) -> (f64, f64) {
        ((self.translation - o.translation).norm(), rotation_angle(&(self.rotation.transpose() * o.rotation)))
    }
}

/// Angle of a rotation matrix.
pub fn rotation_angle(r: &Mat3) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Parallel-jaw grasp. The frame's z-axis is the approach direction and
/// its y-axis the closing direction; the translation is the grasp point
/// midway between the contacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub width: f64,
    pub score: f64,
}

impl Grasp {
    /// Grasp closing along `b - a` and approaching along the part of
    /// `approach` orthogonal to that axis.
    pub fn from_contacts(a: &Vec3, b: &Vec3, approach: &Vec3, score: f64) -> Result<Self> {
        let d = b - a;
        let width = d.norm();
        if !(width > 0.0 && width <= MAX_GRIPPER_WIDTH) {
            return Err(Error::InvalidInput(format!("grasp width {width} outside (0, {MAX_GRIPPER_WIDTH}]")));
        }
        let y = d / width;
        let z = approach - y * approach.dot(&y);
        if z.norm() < 1e-9 {
            return Err(Error::InvalidInput("approach is parallel to the closing axis".into()));
        }
        let z = z.normalize();
        let x = y.cross(&z);
        Ok(Self { rotation: Mat3::from_columns(&[x, y, z]), translation: (a + b) / 2.0, width, score })
    }

    pub fn pose(&self) -> RigidPose {
        RigidPose { rotation: self.rotation, translation: self.translation }
    }

    pub fn approach(&self) -> Vec3 {
        self.rotation.column(2).into()
    }

    pub fn closing_axis(&self) -> Vec3 {
        self.rotation.column(1).into()
    }

    /// Tool pose the gripper holds before the final advance.
    pub fn pregrasp(&self) -> RigidPose {
        self.pose().along_z(-PREGRASP_STANDOFF)
    }

    pub fn is_valid(&self) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Mat3::identity()).abs().max() <= 1e-9
            && (r.determinant() - 1.0).abs() <= 1e-9
            && self.width > 0.0
            && self.width <= MAX_GRIPPER_WIDTH
            && (0.0..=1.0).contains(&self.score)
    }
}

/// Antipodal sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Half-angle of the friction cone each contact normal must fall in.
    pub friction_cone_deg: f64,
    /// First-contact draws per requested grasp.
    pub draws_per_grasp: usize,
    /// Neighbours used for normal estimation.
    pub normal_neighbours: usize,
    /// Narrowest accepted grasp, metres.
    pub min_width: f64,
    /// Largest rotation of the approach about the closing axis away from the
    /// robot-facing direction, degrees.
    pub approach_spread_deg: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            friction_cone_deg: 20.0,
            draws_per_grasp: 50,
            normal_neighbours: 8,
            min_width: 0.005,
            approach_spread_deg: 30.0,
        }
    }
}

/// Fewest object points the sampler works with.
pub const MIN_GRASP_POINTS: usize = 10;

/// Unit normal of the best-fit plane through the `k` nearest neighbours of
/// each point, oriented towards `viewpoint`.
pub fn estimate_normals(points: &[Vec3], k: usize, viewpoint: &Vec3) -> Vec<Vec3> {
    let k = k.clamp(3, points.len().max(3));
    points
        .iter()
        .map(|p| {
            let mut d: Vec<(f64, usize)> =
                points.iter().enumerate().map(|(j, q)| ((q - p).norm_squared(), j)).collect();
            let kk = k.min(d.len());
            d.select_nth_unstable_by(kk - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nb = &d[..kk];
            let mean = nb.iter().map(|(_, j)| points[*j]).sum::<Vec3>() / kk as f64;
            let mut cov = Mat3::zeros();
            for (_, j) in nb {
                let q = points[*j] - mean;
                cov += q * q.transpose();
            }
            let eig = cov.symmetric_eigen();
            let i = eig.eigenvalues.imin();
            let mut n: Vec3 = eig.eigenvectors.column(i).into();
            if n.dot(&(viewpoint - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect()
}

/// Up to `n` antipodal grasps on `points` with outward `normals`.
///
/// Each draw picks a first contact and then a second one uniformly among
/// the points that make a valid pair with it: separation inside the jaw
/// range and both normals within the friction cone of the closing axis
/// (pointing away from each other). The approach is the direction from `robot` to the
/// pair midpoint, made orthogonal to the closing axis and turned about it
/// by a random angle. Score is antipodality times
/// `1 - width / MAX_GRIPPER_WIDTH`.
pub fn sample_grasps(
    points: &[Vec3],
    normals: &[Vec3],
    n: usize,
    robot: &Vec3,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<Vec<Grasp>> {
    if points.len() != normals.len() {
        return Err(Error::DimensionMismatch(format!("{} points with {} normals", points.len(), normals.len())));
    }
    if n == 0 || points.len() < MIN_GRASP_POINTS {
        return Ok(Vec::new());
    }
    let cos_cone = cfg.friction_cone_deg.to_radians().cos();
    let spread = cfg.approach_spread_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut partners = Vec::new();
    for _ in 0..n.saturating_mul(cfg.draws_per_grasp) {
        if out.len() == n {
            break;
        }
        let i = rng.random_range(0..points.len());
        let turn = rng.random_range(-spread..=spread);
        let inward = -normals[i];
        partners.clear();
        for (j, q) in points.iter().enumerate() {
            let d = q - points[i];
            let width = d.norm();
            if j == i || width < cfg.min_width || width > MAX_GRIPPER_WIDTH || d.dot(&inward) <= 0.0 {
                continue;
            }
            let axis = d / width;
            let antipodality = (-normals[i].dot(&axis)).min(normals[j].dot(&axis));
            if antipodality >= cos_cone {
                partners.push((j, antipodality));
            }
        }
        if partners.is_empty() {
            continue;
        }
        let (j, antipodality) = partners[rng.random_range(0..partners.len())];
        let width = (points[j] - points[i]).norm();
        let axis = (points[j] - points[i]) / width;
        let mid = (points[i] + points[j]) / 2.0;
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), turn);
        let approach = rot * (mid - robot);
        let score = (antipodality * (1.0 - width / MAX_GRIPPER_WIDTH)).clamp(0.0, 1.0);
        if let Ok(g) = Grasp::from_contacts(&points[i], &points[j], &approach, score) {
            out.push(g);
        }
    }
    Ok(out)
}

/// Weights of the grasp score and the two direction terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescoreWeights {
    pub score: f64,
    pub robot_to_human: f64,
    pub gravity: f64,
}

impl Default for RescoreWeights {
    fn default() -> Self {
        Self { score: 1.0, robot_to_human: 0.4, gravity: 0.2 }
    }
}

fn check_unit(v: &Vec3, name: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("{name} must be a unit vector, has norm {}", v.norm())));
    }
    Ok(())
}

/// `w_s s + w_r2h vᵀ(R v) + w_u2d uᵀ(R u)` for robot-to-human `v` and
/// gravity `u`.
pub fn rescore(g: &Grasp, robot_to_human: &Vec3, gravity: &Vec3, w: &RescoreWeights) -> Result<f64> {
    check_unit(robot_to_human, "robot-to-human direction")?;
    check_unit(gravity, "gravity direction")?;
    Ok(w.score * g.score
        + w.robot_to_human * robot_to_human.dot(&(g.rotation * robot_to_human))
        + w.gravity * gravity.dot(&(g.rotation * gravity)))
}

/// Gripper geometry used for collision checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GripperGeometry {
    /// Radius of the swept finger and approach volumes.
    pub finger_radius: f64,
    /// Length of the fingers behind the closing line.
    pub finger_length: f64,
    pub body_radius: f64,
    /// Slack added to the grasp width when the jaws open.
    pub opening_margin: f64,
}

impl Default for GripperGeometry {
    fn default() -> Self {
        Self { finger_radius: 0.006, finger_length: 0.04, body_radius: 0.02, opening_margin: 0.01 }
    }
}

impl GripperGeometry {
    pub fn opening(&self, g: &Grasp) -> f64 {
        (g.width + self.opening_margin).min(MAX_GRIPPER_WIDTH)
    }

    /// Whether the jaws open past the contacts by the full margin.
    pub fn fits(&self, g: &Grasp) -> bool {
        g.width + self.opening_margin <= MAX_GRIPPER_WIDTH
    }

    /// Segments swept by the two open fingers, the closing line between
    /// them, and the body on its way from the pre-grasp; with radii.
    fn volumes(&self, g: &Grasp) -> [(Vec3, Vec3, f64); 4] {
        let c = g.translation;
        let y = g.closing_axis();
        let z = g.approach();
        let half = self.opening(g) / 2.0;
        let tip = |s: f64| (c + y * (s * half), c + y * (s * half) - z * self.finger_length, self.finger_radius);
        let body_end = c - z * (self.finger_length + self.body_radius);
        let body_start = c - z * (PREGRASP_STANDOFF + self.finger_length);
        [
            tip(-1.0),
            tip(1.0),
            (c - y * half, c + y * half, self.finger_radius),
            (body_start, body_end, self.body_radius),
        ]
    }
}

/// Obstacles the gripper must avoid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollisionWorld {
    pub hand: Vec<Capsule>,
    pub boxes: Vec<PlacedObject>,
    /// Background plane `z = depth + slope_x x + slope_y y`.
    pub plane: Option<(f64, f64, f64)>,
}

const SWEEP_STEP: f64 = 0.005;

impl CollisionWorld {
    fn segment_hits_hand(&self, a: &Vec3, b: &Vec3, r: f64) -> bool {
        self.hand.iter().any(|c| segment_distance(a, b, &c.a, &c.b) < c.radius + r)
    }

    fn segment_hits_scene(&self, a: &Vec3, b: &Vec3, r: f64) -> bool {
        let n = (((b - a).norm() / SWEEP_STEP).ceil() as usize).max(1);
        (0..=n).any(|i| {
            let p = a.lerp(b, i as f64 / n as f64);
            let blocked_by_box = self.boxes.iter().any(|bx| {
                // Inflate by sampling the six axis offsets of the radius.
                bx.contains(&p)
                    || [Vec3::x(), Vec3::y(), Vec3::z()]
                        .iter()
                        .any(|e| bx.contains(&(p + e * r)) || bx.contains(&(p - e * r)))
            });
            let behind_plane = self.plane.is_some_and(|(d, sx, sy)| p.z + r >= d + sx * p.x + sy * p.y);
            blocked_by_box || behind_plane
        })
    }

    /// True when the grasp's fingers, closing region or approach sweep
    /// touch the hand, the clutter or the background.
    pub fn blocks(&self, g: &Grasp, gripper: &GripperGeometry) -> bool {
        gripper.volumes(g).iter().any(|(a, b, r)| self.segment_hits_hand(a, b, *r) || self.segment_hits_scene(a, b, *r))
    }
}

/// Chosen grasp and the tool pose to approach first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub grasp: Grasp,
    pub pregrasp: RigidPose,
    pub combined_score: f64,
}

/// Drops candidates too wide for the jaws or colliding and returns the best rescored survivor (ties
/// broken by higher raw score, then lower index).
pub fn select_grasp(
    grasps: &[Grasp],
    world: &CollisionWorld,
    gripper: &GripperGeometry,
    robot_to_human: &Vec3,
    gravity: &Vec3,
    w: &RescoreWeights,
) -> Result<Option<Selection>> {
    let mut best: Option<Selection> = None;
    for (i, g) in grasps.iter().enumerate() {
        if !gripper.fits(g) || world.blocks(g, gripper) {
            continue;
        }
        let c = rescore(g, robot_to_human, gravity, w)?;
        let better =
            best.as_ref().is_none_or(|b| c > b.combined_score || (c == b.combined_score && g.score > b.grasp.score));
        if better {
            best = Some(Selection { index: i, grasp: *g, pregrasp: g.pregrasp(), combined_score: c });
        }
    }
    Ok(best)
}
