use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

/// Hits closer than this along a ray are ignored.
const T_MIN: f64 = 1e-9;

/// Roots of `a t² + 2 b t + c` in ascending order.
fn roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a.abs() < 1e-300 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // Numerically stable pair.
    let q = -(b + b.signum() * s);
    let (t1, t2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((t1.min(t2), t1.max(t2)))
}

fn keep(best: &mut Option<(f64, Vec3)>, t: f64, n: Vec3) {
    if t > T_MIN && best.is_none_or(|b| t < b.0) {
        *best = Some((t, n));
    }
}

/// Solid of revolution about the local `+y` axis whose radius varies
/// linearly from `r0` at `y0` to `r1` at `y1`, closed by flat caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frustum {
    pub y0: f64,
    pub y1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl Frustum {
    pub fn radius_at(&self, y: f64) -> f64 {
        self.r0 + (self.r1 - self.r0) * (y - self.y0) / (self.y1 - self.y0)
    }

    fn slope(&self) -> f64 {
        (self.r1 - self.r0) / (self.y1 - self.y0)
    }

    fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
        let k = self.slope();
        let a0 = self.r0 - k * self.y0;
        // (ox + t dx)² + (oz + t dz)² = (a0 + k (oy + t dy))²
        let ra = a0 + k * o.y;
        let a = d.x * d.x + d.z * d.z - k * k * d.y * d.y;
        let b = o.x * d.x + o.z * d.z - ra * k * d.y;
        let c = o.x * o.x + o.z * o.z - ra * ra;
        let mut best = None;
        if let Some((t1, t2)) = roots(a, b, c) {
            for t in [t1, t2] {
                let p = o + d * t;
                if p.y >= self.y0 && p.y <= self.y1 && self.radius_at(p.y) > 0.0 {
                    keep(&mut best, t, Vec3::new(p.x, -self.radius_at(p.y) * k, p.z).normalize());
                }
            }
        }
        if d.y != 0.0 {
            for (y, r, ny) in [(self.y0, self.r0, -1.0), (self.y1, self.r1, 1.0)] {
                let t = (y - o.y) / d.y;
                let p = o + d * t;
                if p.x * p.x + p.z * p.z <= r * r {
                    keep(&mut best, t, Vec3::new(0.0, ny, 0.0));
                }
            }
        }
        best
    }

    fn contains(&self, p: &Vec3) -> bool {
        p.y >= self.y0 && p.y <= self.y1 && p.x * p.x + p.z * p.z <= self.radius_at(p.y).powi(2)
    }
}

/// Object families, each in a local frame with `+y` as the symmetry/up axis
/// and the origin at the centre of its height range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        radius: f64,
    },
    Cylinder {
        radius: f64,
        height: f64,
    },
    CappedCone {
        bottom_radius: f64,
        top_radius: f64,
        height: f64,
    },
    Box {
        half_x: f64,
        half_z: f64,
        height: f64,
    },
    /// Foot disc, thin stem and a flared bowl stacked along `+y`.
    StemGlass {
        foot_radius: f64,
        foot_height: f64,
        stem_radius: f64,
        stem_height: f64,
        bowl_bottom_radius: f64,
        bowl_top_radius: f64,
        bowl_height: f64,
    },
}

impl Primitive {
    pub fn height(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => 2.0 * radius,
            Primitive::Cylinder { height, .. }
            | Primitive::CappedCone { height, .. }
            | Primitive::Box { height, .. } => height,
            Primitive::StemGlass { foot_height, stem_height, bowl_height, .. } => {
                foot_height + stem_height + bowl_height
            }
        }
    }

    /// Widest horizontal extent.
    pub fn max_width(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => 2.0 * radius,
            Primitive::Cylinder { radius, .. } => 2.0 * radius,
            Primitive::CappedCone { bottom_radius, top_radius, .. } => 2.0 * bottom_radius.max(top_radius),
            Primitive::Box { half_x, half_z, .. } => 2.0 * (half_x * half_x + half_z * half_z).sqrt(),
            Primitive::StemGlass { foot_radius, bowl_top_radius, bowl_bottom_radius, .. } => {
                2.0 * foot_radius.max(bowl_top_radius).max(bowl_bottom_radius)
            }
        }
    }

    fn stem_glass_parts(&self) -> Option<[Frustum; 3]> {
        let Primitive::StemGlass {
            foot_radius,
            foot_height,
            stem_radius,
            stem_height,
            bowl_bottom_radius,
            bowl_top_radius,
            bowl_height,
        } = *self
        else {
            return None;
        };
        let y = -0.5 * self.height();
        let foot = Frustum { y0: y, y1: y + foot_height, r0: foot_radius, r1: foot_radius };
        let stem = Frustum { y0: foot.y1, y1: foot.y1 + stem_height, r0: stem_radius, r1: stem_radius };
        let bowl = Frustum { y0: stem.y1, y1: stem.y1 + bowl_height, r0: bowl_bottom_radius, r1: bowl_top_radius };
        Some([foot, stem, bowl])
    }

    fn frustum(&self) -> Option<Frustum> {
        match *self {
            Primitive::Cylinder { radius, height } => {
                Some(Frustum { y0: -0.5 * height, y1: 0.5 * height, r0: radius, r1: radius })
            }
            Primitive::CappedCone { bottom_radius, top_radius, height } => {
                Some(Frustum { y0: -0.5 * height, y1: 0.5 * height, r0: bottom_radius, r1: top_radius })
            }
            _ => None,
        }
    }

    /// Nearest hit of the local-frame ray `o + t d` with `t > 0`, with the
    /// outward unit normal there.
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
        match *self {
            Primitive::Sphere { radius } => {
                let (t1, t2) = roots(d.dot(d), o.dot(d), o.dot(o) - radius * radius)?;
                let mut best = None;
                for t in [t1, t2] {
                    keep(&mut best, t, (o + d * t) / radius);
                }
                best
            }
            Primitive::Box { half_x, half_z, height } => {
                let h = Vec3::new(half_x, 0.5 * height, half_z);
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                let mut axis = 0;
                for a in 0..3 {
                    if d[a] == 0.0 {
                        if o[a].abs() > h[a] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (-h[a] - o[a]) / d[a];
                    let t2 = (h[a] - o[a]) / d[a];
                    let (lo, hi) = (t1.min(t2), t1.max(t2));
                    if lo > t_near {
                        t_near = lo;
                        axis = a;
                    }
                    t_far = t_far.min(hi);
                }
                if t_near > t_far || t_far <= T_MIN {
                    return None;
                }
                if t_near > T_MIN {
                    let mut n = Vec3::zeros();
                    n[axis] = -d[axis].signum();
                    Some((t_near, n))
                } else {
                    // Origin inside: exit face.
                    let p = o + d * t_far;
                    let a = (0..3).max_by(|&i, &j| (p[i].abs() / h[i]).total_cmp(&(p[j].abs() / h[j]))).unwrap();
                    let mut n = Vec3::zeros();
                    n[a] = p[a].signum();
                    Some((t_far, n))
                }
            }
            Primitive::StemGlass { .. } => {
                let mut best = None;
                for f in self.stem_glass_parts().unwrap() {
                    if let Some((t, n)) = f.intersect(o, d) {
                        keep(&mut best, t, n);
                    }
                }
                best
            }
            _ => self.frustum().unwrap().intersect(o, d),
        }
    }

    /// Closed-set membership in the local frame.
    pub fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Primitive::Sphere { radius } => p.norm_squared() <= radius * radius,
            Primitive::Box { half_x, half_z, height } => {
                p.x.abs() <= half_x && p.y.abs() <= 0.5 * height && p.z.abs() <= half_z
            }
            Primitive::StemGlass { .. } => self.stem_glass_parts().unwrap().iter().any(|f| f.contains(p)),
            _ => self.frustum().unwrap().contains(p),
        }
    }

    /// Distance from the axis to the surface at height `y` in direction
    /// `(cos φ, 0, sin φ)`; `None` outside the height range.
    pub fn surface_radius(&self, y: f64, phi: f64) -> Option<f64> {
        let half = 0.5 * self.height();
        if y.abs() > half {
            return None;
        }
        match *self {
            Primitive::Sphere { radius } => Some((radius * radius - y * y).max(0.0).sqrt()),
            Primitive::Box { half_x, half_z, .. } => {
                let (s, c) = phi.sin_cos();
                let tx = if c != 0.0 { half_x / c.abs() } else { f64::INFINITY };
                let tz = if s != 0.0 { half_z / s.abs() } else { f64::INFINITY };
                Some(tx.min(tz))
            }
            Primitive::StemGlass { .. } => {
                let parts = self.stem_glass_parts().unwrap();
                // Widest part covering y (shared faces belong to both).
                parts.iter().filter(|f| y >= f.y0 && y <= f.y1).map(|f| f.radius_at(y)).reduce(f64::max)
            }
            _ => Some(self.frustum().unwrap().radius_at(y)),
        }
    }

    /// Height range where the object can be held from the side.
    pub fn grip_range(&self) -> (f64, f64) {
        let half = 0.5 * self.height();
        match self {
            Primitive::Sphere { radius } => (-0.35 * radius, 0.35 * radius),
            Primitive::StemGlass { .. } => {
                let bowl = self.stem_glass_parts().unwrap()[2];
                let (a, b) = (bowl.y0 + 0.3 * (bowl.y1 - bowl.y0), bowl.y0 + 0.7 * (bowl.y1 - bowl.y0));
                (a, b)
            }
            _ => (-0.35 * half, 0.35 * half),
        }
    }
}

/// Rigid placement: `world = rotation · local + center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub center: Vec3,
}

impl Pose {
    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.center
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.center)
    }

    pub fn dir_to_local(&self, d: &Vec3) -> Vec3 {
        self.rotation.transpose() * d
    }
}

/// Primitive in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub shape: Primitive,
    pub pose: Pose,
}

impl PlacedObject {
    /// Nearest hit of the world ray `o + t d` with its world normal.
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
        let (t, n) = self.shape.intersect(&self.pose.to_local(o), &self.pose.dir_to_local(d))?;
        Some((t, self.pose.rotation * n))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.shape.contains(&self.pose.to_local(p))
    }
}

/// Sphere-swept segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        let ab = self.b - self.a;
        let l2 = ab.norm_squared();
        let s = if l2 == 0.0 { 0.0 } else { ((p - self.a).dot(&ab) / l2).clamp(0.0, 1.0) };
        self.a + ab * s
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        (p - self.closest_point(p)).norm() - self.radius
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.distance(p) <= 0.0
    }

    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
        let mut best = None;
        let ab = self.b - self.a;
        let l = ab.norm();
        if l > 0.0 {
            let w = ab / l;
            let oa = o - self.a;
            let dp = d - w * d.dot(&w);
            let op = oa - w * oa.dot(&w);
            if let Some((t1, t2)) = roots(dp.dot(&dp), dp.dot(&op), op.dot(&op) - self.radius * self.radius) {
                for t in [t1, t2] {
                    let s = (o + d * t - self.a).dot(&w);
                    if (0.0..=l).contains(&s) {
                        let p = o + d * t;
                        keep(&mut best, t, (p - (self.a + w * s)) / self.radius);
                    }
                }
            }
        }
        for c in [self.a, self.b] {
            let oc = o - c;
            if let Some((t1, t2)) = roots(d.dot(d), oc.dot(d), oc.dot(&oc) - self.radius * self.radius) {
                for t in [t1, t2] {
                    keep(&mut best, t, (o + d * t - c) / self.radius);
                }
            }
        }
        best
    }
}

/// Distance between segments `p0-p1` and `q0-q1`.
pub fn segment_distance(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return r.norm();
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-18 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}
