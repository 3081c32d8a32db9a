use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;
pub const MIDDLE_MCP: usize = 9;
pub const KEYPOINT_COUNT: usize = 21;

/// Largest plausible distance between two keypoints of one hand, metres.
pub const MAX_HAND_SPAN: f64 = 0.5;

/// Parent/child pairs of the kinematic tree: five chains of four joints
/// rooted at the wrist (thumb, index, middle, ring, pinky).
pub const HAND_BONES: [(usize, usize); 20] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (0, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (0, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (0, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (0, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

const MIN_FRAME_ANGLE: f64 = 1e-6;

/// 21 hand keypoints in the camera frame, metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct HandKeypoints {
    points: Vec<Vec3>,
}

impl HandKeypoints {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.len() != KEYPOINT_COUNT {
            return Err(Error::InvalidInput(format!("expected {KEYPOINT_COUNT} hand keypoints, got {}", points.len())));
        }
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidInput("non-finite hand keypoint".into()));
        }
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                if (a - b).norm() >= MAX_HAND_SPAN {
                    return Err(Error::InvalidInput("hand keypoints span more than 0.5 m".into()));
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn wrist(&self) -> Vec3 {
        self.points[WRIST]
    }

    /// Applies `p -> r p + t` to every keypoint.
    pub fn transformed(&self, r: &Mat3, t: &Vec3) -> Self {
        Self { points: self.points.iter().map(|p| r * p + t).collect() }
    }

    /// Copy with every keypoint's depth set to zero.
    pub fn flattened(&self) -> Self {
        Self { points: self.points.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect() }
    }
}

impl TryFrom<Vec<[f64; 3]>> for HandKeypoints {
    type Error = Error;

    fn try_from(v: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(v.into_iter().map(Vec3::from).collect())
    }
}

impl From<HandKeypoints> for Vec<[f64; 3]> {
    fn from(k: HandKeypoints) -> Self {
        k.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Rotation whose columns are the canonical wrist axes: `x` towards the
/// middle MCP, `y` towards the index MCP orthogonalised against `x`,
/// `z = x × y`.
pub fn hand_frame(kp: &HandKeypoints) -> Result<Mat3> {
    let w = kp.points[WRIST];
    let a = kp.points[MIDDLE_MCP] - w;
    let b = kp.points[INDEX_MCP] - w;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateHandFrame);
    }
    let sin = a.cross(&b).norm() / (na * nb);
    if sin.asin() < MIN_FRAME_ANGLE {
        return Err(Error::DegenerateHandFrame);
    }
    let x = a / na;
    let y = (b - x * x.dot(&b)).normalize();
    let z = x.cross(&y);
    Ok(Mat3::from_columns(&[x, y, z]))
}

/// All keypoints expressed in the canonical wrist frame, flattened to 63
/// values.
pub fn hand_abs_feature(kp: &HandKeypoints) -> Result<Vec<f64>> {
    let r = hand_frame(kp)?;
    let w = kp.wrist();
    let rt = r.transpose();
    Ok(kp.points.iter().flat_map(|p| (rt * (p - w)).data.0[0]).collect())
}

/// Keypoint offsets from `center`, camera frame, flattened to 63 values.
pub fn hand_rel_feature(kp: &HandKeypoints, center: &Vec3) -> Vec<f64> {
    kp.points.iter().flat_map(|p| (p - center).data.0[0]).collect()
}
