use super::grasp::RigidPose;
use crate::features::HandKeypoints;
use crate::{Error, Mat3, Result, Vec3};

/// Relative size of the second singular value below which the centred
/// keypoints count as collinear.
const RANK_TOLERANCE: f64 = 1e-9;

/// Rigid hand motion from `initial` to `current` keypoints.
///
/// `T` is the wrist displacement. `R` comes from the SVD of the covariance
/// of the wrist-centred sets, `H = (X_i - w_i)ᵀ (X_c - w_c) = U Σ Vᵀ`,
/// as `R = V Uᵀ`, with the last column of `V` negated when that would be a
/// reflection.
pub fn estimate_hand_motion(initial: &HandKeypoints, current: &HandKeypoints) -> Result<(Mat3, Vec3)> {
    let wi = initial.wrist();
    let wc = current.wrist();
    let mut h = Mat3::zeros();
    for (a, b) in initial.points().iter().zip(current.points()) {
        h += (a - wi) * (b - wc).transpose();
    }
    let svd = h.svd(true, true);
    let s = svd.singular_values;
    // Singular values are not sorted by nalgebra.
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= RANK_TOLERANCE * sorted[0] {
        return Err(Error::DegenerateHandConfiguration);
    }
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // Flip the axis of the smallest singular value.
        let k = s.imin();
        let mut v = v;
        v.column_mut(k).neg_mut();
        r = v * u.transpose();
    }
    Ok((r, wc - wi))
}

/// Carries a pose along with the hand: rotated by `r` about the initial
/// wrist `wrist`, then translated by `t`.
pub fn update_pregrasp(pose: &RigidPose, r: &Mat3, t: &Vec3, wrist: &Vec3) -> RigidPose {
    RigidPose { rotation: r * pose.rotation, translation: r * (pose.translation - wrist) + wrist + t }
}
