use serde::{Deserialize, Serialize};

use super::shapes::{Capsule, PlacedObject, Primitive};
use crate::features::{HandKeypoints, HAND_BONES};
use crate::{Error, Result, Vec3};

/// Widest object a hand can close around.
pub const MAX_GRASP_WIDTH: f64 = 0.12;

/// Radius of the capsules used to render the hand.
pub const HAND_CAPSULE_RADIUS: f64 = 0.009;

/// Links across the palm, added to the bone capsules so the hand renders
/// as a closed surface.
const PALM_LINKS: [(usize, usize); 4] = [(2, 5), (5, 9), (9, 13), (13, 17)];

/// Vertical spacing of neighbouring fingers at unit spread, metres.
const FINGER_SPACING: f64 = 0.016;
/// Surface arc from the palm direction to distal joints and fingertips.
const DISTAL_ARC: f64 = 0.045;
const TIP_ARC: f64 = 0.065;
const THUMB_DISTAL_ARC: f64 = 0.035;
const THUMB_TIP_ARC: f64 = 0.055;
/// Angular wrap never exceeds this, so small objects are not encircled twice.
const MAX_WRAP: f64 = 2.6;
const KNUCKLE_GAP: f64 = 0.025;
const MIDDLE_JOINT_GAP: f64 = 0.012;
const WRIST_DROP: f64 = 0.035;

/// How the hand holds the object, in the object's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripParams {
    /// Azimuth of the palm about the object's up axis, radians.
    pub angle: f64,
    /// Grip height as a fraction of the object's holdable range, `[0, 1]`.
    pub height: f64,
    /// Scale of the finger spacing along the up axis.
    pub spread: f64,
    /// Distance of the wrist beyond the object surface, metres.
    pub wrist_offset: f64,
}

impl GripParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.angle.is_finite()
            && (0.0..=1.0).contains(&self.height)
            && self.spread > 0.0
            && self.spread <= 2.0
            && self.wrist_offset > 0.0
            && self.wrist_offset < 0.2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid grip {self:?}")))
        }
    }
}

fn direction(phi: f64) -> Vec3 {
    Vec3::new(phi.cos(), 0.0, phi.sin())
}

struct Wrapper<'a> {
    shape: &'a Primitive,
    half: f64,
}

impl Wrapper<'_> {
    fn clamp(&self, y: f64) -> f64 {
        let m = 0.002_f64.min(self.half);
        y.clamp(-self.half + m, self.half - m)
    }

    fn radius(&self, y: f64, phi: f64) -> f64 {
        self.shape.surface_radius(self.clamp(y), phi).expect("clamped height")
    }

    /// Point `gap` beyond the surface at height `y` and azimuth `phi`.
    fn around(&self, y: f64, phi: f64, gap: f64) -> Vec3 {
        let y = self.clamp(y);
        Vec3::new(0.0, y, 0.0) + direction(phi) * (self.radius(y, phi) + gap)
    }

    /// Angle subtended by `arc` of surface at height `y`.
    fn wrap(&self, y: f64, phi: f64, arc: f64) -> f64 {
        (arc / self.radius(y, phi).max(1e-3)).min(MAX_WRAP)
    }

    /// Knuckle, middle joint, distal joint and tip of a finger wrapping
    /// from `phi` in direction `sign`.
    fn chain(&self, y: f64, phi: f64, sign: f64, distal_arc: f64, tip_arc: f64, knuckle_turn: f64) -> [Vec3; 4] {
        let distal_phi = phi + sign * self.wrap(y, phi, distal_arc);
        let tip_phi = phi + sign * self.wrap(y, phi, tip_arc);
        let knuckle_phi = phi + sign * knuckle_turn;
        let knuckle = self.around(y, knuckle_phi, KNUCKLE_GAP);
        let distal = self.around(y, distal_phi, 0.0);
        let tip = self.around(y, tip_phi, 0.0);
        // Middle joint: halfway in angle, lifted off the surface.
        let middle = self.around(y, 0.5 * (knuckle_phi + distal_phi), MIDDLE_JOINT_GAP);
        [knuckle, middle, distal, tip]
    }
}

/// 21 keypoints of a hand wrapped around `object`.
///
/// Distal joints and fingertips lie exactly on the surface; knuckles and
/// middle joints sit just outside it. The thumb wraps the opposite way to
/// the four fingers.
pub fn synth_hand(object: &PlacedObject, grip: &GripParams) -> Result<HandKeypoints> {
    grip.validate()?;
    let shape = &object.shape;
    let width = shape.max_width();
    if !(width > 0.0 && shape.height() > 0.0) {
        return Err(Error::DegenerateSpec(format!("object {shape:?} has no extent")));
    }
    if width >= MAX_GRASP_WIDTH {
        return Err(Error::DegenerateSpec(format!(
            "object width {width:.3} m is not graspable (limit {MAX_GRASP_WIDTH} m)"
        )));
    }
    let w = Wrapper { shape, half: 0.5 * shape.height() };
    let (lo, hi) = shape.grip_range();
    let y = lo + grip.height * (hi - lo);
    let theta = grip.angle;

    let mut local = Vec::with_capacity(21);
    let wrist =
        Vec3::new(0.0, w.clamp(y) - WRIST_DROP, 0.0) + direction(theta) * (w.radius(y, theta) + grip.wrist_offset);
    local.push(wrist);

    let thumb_y = y - 0.5 * FINGER_SPACING * grip.spread;
    let [t_mcp, _, t_ip, t_tip] = w.chain(thumb_y, theta, -1.0, THUMB_DISTAL_ARC, THUMB_TIP_ARC, 0.5);
    let t_mcp = t_mcp + direction(theta) * 0.005;
    let t_cmc = wrist.lerp(&t_mcp, 0.45);
    local.extend([t_cmc, t_mcp, t_ip, t_tip]);

    for k in 0..4 {
        let fy = y + FINGER_SPACING * grip.spread * (1.5 - k as f64);
        local.extend(w.chain(fy, theta, 1.0, DISTAL_ARC, TIP_ARC, 0.35));
    }
    HandKeypoints::new(local.iter().map(|p| object.pose.to_world(p)).collect())
}

/// Capsules along every bone and across the palm.
pub fn hand_capsules(kp: &HandKeypoints) -> Vec<Capsule> {
    let p = kp.points();
    HAND_BONES
        .iter()
        .chain(PALM_LINKS.iter())
        .map(|&(a, b)| Capsule { a: p[a], b: p[b], radius: HAND_CAPSULE_RADIUS })
        .collect()
}

/// Keypoint indices of the five fingertips and their distal joints.
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];
pub const DISTAL_JOINTS: [usize; 5] = [3, 7, 11, 15, 19];
