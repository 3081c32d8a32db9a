use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::hand::{hand_capsules, synth_hand, GripParams};
use super::record::SceneRecord;
use super::shapes::{Capsule, PlacedObject, Pose, Primitive};
use crate::features::HandKeypoints;
use crate::{CameraIntrinsics, DepthImage, Error, Mask, Mat3, Result, RgbImage, Vec3};

/// Working range of the simulated sensor, metres.
pub const DEPTH_RANGE: (f64, f64) = (0.3, 3.0);

/// Fraction of the background colour seen through the transparent object.
const TRANSMITTANCE: f64 = 0.65;
const RGB_NOISE: f64 = 4.0;
/// Noisy readings are clamped to stay positive.
const MIN_NOISY_DEPTH: f64 = 1e-4;

/// Object family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Sphere,
    Cylinder,
    CappedCone,
    Box,
    StemGlass,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 5] =
        [ObjectKind::Sphere, ObjectKind::Cylinder, ObjectKind::CappedCone, ObjectKind::Box, ObjectKind::StemGlass];

    /// Families withheld from training in the unknown-category protocol.
    pub fn is_unknown_category(self) -> bool {
        matches!(self, ObjectKind::CappedCone | ObjectKind::StemGlass)
    }

    pub fn index(self) -> usize {
        ObjectKind::ALL.iter().position(|k| *k == self).expect("listed")
    }
}

impl Primitive {
    pub fn kind(&self) -> ObjectKind {
        match self {
            Primitive::Sphere { .. } => ObjectKind::Sphere,
            Primitive::Cylinder { .. } => ObjectKind::Cylinder,
            Primitive::CappedCone { .. } => ObjectKind::CappedCone,
            Primitive::Box { .. } => ObjectKind::Box,
            Primitive::StemGlass { .. } => ObjectKind::StemGlass,
        }
    }
}

/// Probabilities of each failure mode on an object pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionParams {
    /// Reading dropped entirely.
    pub p_missing: f64,
    /// Sensor sees through to whatever is behind the object.
    pub p_background: f64,
    /// Reading perturbed by Gaussian noise.
    pub p_noise: f64,
    pub noise_sigma: f64,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        Self { p_missing: 0.35, p_background: 0.35, p_noise: 0.15, noise_sigma: 0.01 }
    }
}

impl CorruptionParams {
    pub fn none() -> Self {
        Self { p_missing: 0.0, p_background: 0.0, p_noise: 0.0, noise_sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let p = [self.p_missing, self.p_background, self.p_noise];
        let ok = p.iter().all(|x| (0.0..=1.0).contains(x))
            && p.iter().sum::<f64>() <= 1.0 + 1e-12
            && self.noise_sigma >= 0.0
            && self.noise_sigma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid corruption parameters {self:?}")))
        }
    }
}

/// Axis-aligned clutter box with a yaw about the camera's vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistractorBox {
    pub center: Vec3,
    pub half_extent: Vec3,
    pub yaw: f64,
    pub color: [f64; 3],
}

impl DistractorBox {
    fn placed(&self) -> PlacedObject {
        PlacedObject {
            shape: Primitive::Box {
                half_x: self.half_extent.x,
                half_z: self.half_extent.z,
                height: 2.0 * self.half_extent.y,
            },
            pose: Pose {
                rotation: *Rotation3::from_axis_angle(&Vec3::y_axis(), self.yaw).matrix(),
                center: self.center,
            },
        }
    }
}

/// Checkered plane `z = depth + slope_x x + slope_y y` plus clutter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub depth: f64,
    pub slope_x: f64,
    pub slope_y: f64,
    pub checker_size: f64,
    pub colors: [[f64; 3]; 2],
    pub distractors: [DistractorBox; 2],
}

/// Everything needed to render one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub object: PlacedObject,
    pub object_color: [f64; 3],
    pub hand: Option<GripParams>,
    pub skin_color: [f64; 3],
    pub background: Background,
    pub intrinsics: CameraIntrinsics,
    pub corruption: CorruptionParams,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.corruption.validate()?;
        let z = self.object.pose.center.z;
        let b = self.background.depth;
        if !(z > DEPTH_RANGE.0 && z < DEPTH_RANGE.1 && b > DEPTH_RANGE.0 && b < DEPTH_RANGE.1) {
            return Err(Error::DegenerateSpec(format!(
                "object at {z:.3} m / background at {b:.3} m outside the sensor range"
            )));
        }
        let r = self.object.pose.rotation;
        if ((r.transpose() * r) - Mat3::identity()).norm() > 1e-9 {
            return Err(Error::DegenerateSpec("object rotation is not orthonormal".into()));
        }
        Ok(())
    }

    pub fn keypoints(&self) -> Result<Option<HandKeypoints>> {
        self.hand.as_ref().map(|g| synth_hand(&self.object, g)).transpose()
    }
}

/// Output of the renderer.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub depth: DepthImage,
    /// Depth with the object removed: what the sensor sees through it.
    pub see_through: DepthImage,
    pub mask_obj: Mask,
    pub mask_hand: Mask,
    pub rgb: RgbImage,
}

#[derive(Clone, Copy, PartialEq)]
enum Entity {
    Object,
    Hand,
    Clutter(usize),
    Plane,
}

struct Hit {
    t: f64,
    normal: Vec3,
    entity: Entity,
}

struct Scene<'a> {
    spec: &'a SceneSpec,
    capsules: Vec<Capsule>,
    clutter: Vec<PlacedObject>,
}

impl Scene<'_> {
    fn nearest(&self, d: &Vec3, with_object: bool) -> Option<Hit> {
        let o = Vec3::zeros();
        let mut best: Option<Hit> = None;
        let mut consider = |h: Option<(f64, Vec3)>, entity| {
            if let Some((t, normal)) = h {
                if best.as_ref().is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, normal, entity });
                }
            }
        };
        if with_object {
            consider(self.spec.object.intersect(&o, d), Entity::Object);
        }
        for c in &self.capsules {
            consider(c.intersect(&o, d), Entity::Hand);
        }
        for (i, b) in self.clutter.iter().enumerate() {
            consider(b.intersect(&o, d), Entity::Clutter(i));
        }
        let bg = &self.spec.background;
        let denom = 1.0 - bg.slope_x * d.x - bg.slope_y * d.y;
        if denom > 0.0 {
            let t = bg.depth / denom;
            consider(Some((t, Vec3::new(-bg.slope_x, -bg.slope_y, 1.0).normalize())), Entity::Plane);
        }
        best
    }

    fn albedo(&self, hit: &Hit, d: &Vec3) -> [f64; 3] {
        let bg = &self.spec.background;
        match hit.entity {
            Entity::Object => self.spec.object_color,
            Entity::Hand => self.spec.skin_color,
            Entity::Clutter(i) => bg.distractors[i].color,
            Entity::Plane => {
                let p = d * hit.t;
                let cell = (p.x / bg.checker_size).floor() + (p.y / bg.checker_size).floor();
                bg.colors[(cell.rem_euclid(2.0)) as usize]
            }
        }
    }

    fn shade(&self, hit: &Hit, d: &Vec3) -> [f64; 3] {
        let lambert = 0.25 + 0.75 * hit.normal.dot(&d.normalize()).abs();
        self.albedo(hit, d).map(|c| c * lambert)
    }
}

/// Rounds a depth to the precision it is stored with.
fn stored(z: f64) -> f64 {
    z as f32 as f64
}

/// Ray-casts every pixel centre against the object, the hand capsules, the
/// clutter boxes and the background plane; the nearest hit wins.
pub fn render_perfect(spec: &SceneSpec) -> Result<Rendering> {
    spec.validate()?;
    let k = &spec.intrinsics;
    let (w, h) = (k.width, k.height);
    let keypoints = spec.keypoints()?;
    let scene = Scene {
        spec,
        capsules: keypoints.as_ref().map(hand_capsules).unwrap_or_default(),
        clutter: spec.background.distractors.iter().map(DistractorBox::placed).collect(),
    };
    let mut depth = DepthImage::zeros(w, h);
    let mut see_through = DepthImage::zeros(w, h);
    let mut mask_obj = Mask::empty(w, h);
    let mut mask_hand = Mask::empty(w, h);
    let mut rgb = vec![0u8; w * h * 3];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, RGB_NOISE).expect("finite sigma");
    for v in 0..h {
        for u in 0..w {
            let d = k.pixel_direction(u, v);
            let behind = scene.nearest(&d, false);
            let hit = scene.nearest(&d, true);
            if let Some(b) = &behind {
                see_through.set(u, v, stored(b.t));
            }
            let mut color = [0.0; 3];
            if let Some(hit) = &hit {
                depth.set(u, v, stored(hit.t));
                color = scene.shade(hit, &d);
                match hit.entity {
                    Entity::Object => {
                        mask_obj.set(u, v, true);
                        let back = behind.as_ref().map(|b| scene.shade(b, &d)).unwrap_or_default();
                        for (c, b) in color.iter_mut().zip(back) {
                            *c = (1.0 - TRANSMITTANCE) * *c + TRANSMITTANCE * b;
                        }
                    }
                    Entity::Hand => mask_hand.set(u, v, true),
                    _ => {}
                }
            }
            let px = &mut rgb[(v * w + u) * 3..][..3];
            for (o, c) in px.iter_mut().zip(color) {
                *o = (255.0 * c + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    if mask_obj.count() == 0 {
        return Err(Error::DegenerateSpec("object is not visible".into()));
    }
    Ok(Rendering { depth, see_through, mask_obj, mask_hand, rgb: RgbImage::new(w, h, rgb)? })
}

/// Applies the sensor failure modes to the object pixels, visited in
/// row-major order with one uniform draw each.
///
/// `see_through` supplies the background depth for see-through failures.
pub fn corrupt_depth(
    perfect: &DepthImage,
    see_through: &DepthImage,
    mask: &Mask,
    params: &CorruptionParams,
    seed: u64,
) -> Result<DepthImage> {
    params.validate()?;
    let (w, h) = (perfect.width, perfect.height);
    if (see_through.width, see_through.height) != (w, h) || (mask.width, mask.height) != (w, h) {
        return Err(Error::DimensionMismatch("corruption inputs differ in size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = perfect.clone();
    let background = params.p_missing + params.p_background;
    let noisy = background + params.p_noise;
    for (u, v) in mask.pixels() {
        let x: f64 = rng.random();
        let z = if x < params.p_missing {
            0.0
        } else if x < background {
            see_through.get(u, v)
        } else if x < noisy {
            let p = perfect.get(u, v);
            let z = stored(p + noise.sample(&mut rng));
            if z > 0.0 {
                z
            } else {
                stored(MIN_NOISY_DEPTH)
            }
        } else {
            continue;
        };
        out.set(u, v, z);
    }
    Ok(out)
}

/// Relative frequency of each object family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyWeights {
    pub sphere: f64,
    pub cylinder: f64,
    pub capped_cone: f64,
    #[serde(rename = "box")]
    pub cuboid: f64,
    pub stem_glass: f64,
}

impl Default for FamilyWeights {
    fn default() -> Self {
        Self { sphere: 1.0, cylinder: 1.0, capped_cone: 1.0, cuboid: 1.0, stem_glass: 1.0 }
    }
}

impl FamilyWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.sphere, self.cylinder, self.capped_cone, self.cuboid, self.stem_glass]
    }

    /// Copy keeping only the families accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(ObjectKind) -> bool) -> Self {
        let a = self.as_array();
        let f = |k: ObjectKind| if keep(k) { a[k.index()] } else { 0.0 };
        Self {
            sphere: f(ObjectKind::Sphere),
            cylinder: f(ObjectKind::Cylinder),
            capped_cone: f(ObjectKind::CappedCone),
            cuboid: f(ObjectKind::Box),
            stem_glass: f(ObjectKind::StemGlass),
        }
    }

    /// Normalised probabilities.
    pub fn probabilities(&self) -> Result<[f64; 5]> {
        let a = self.as_array();
        let total: f64 = a.iter().sum();
        if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || total <= 0.0 {
            return Err(Error::Config(format!("invalid family weights {self:?}")));
        }
        Ok(a.map(|x| x / total))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<ObjectKind> {
        let p = self.probabilities()?;
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (k, pk) in ObjectKind::ALL.iter().zip(p) {
            acc += pk;
            if x < acc {
                return Ok(*k);
            }
        }
        Ok(*ObjectKind::ALL.iter().rev().find(|k| p[k.index()] > 0.0).expect("positive total"))
    }
}

/// Distribution scenes are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecDistribution {
    pub width: usize,
    pub height: usize,
    /// Horizontal focal length as a multiple of the image width.
    pub focal_ratio: f64,
    pub families: FamilyWeights,
    pub corruption: CorruptionParams,
    /// Object distance range, metres.
    pub object_depth: (f64, f64),
    /// Background plane distance range, metres.
    pub background_depth: (f64, f64),
    /// Fewest object pixels a scene may have.
    pub min_object_pixels: usize,
}

impl Default for SpecDistribution {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            focal_ratio: 1.5625,
            families: FamilyWeights::default(),
            corruption: CorruptionParams::default(),
            object_depth: (0.45, 0.65),
            background_depth: (0.9, 1.1),
            min_object_pixels: 20,
        }
    }
}

impl SpecDistribution {
    pub fn validate(&self) -> Result<()> {
        CameraIntrinsics::centered(self.width, self.height, self.focal_ratio)?;
        self.families.probabilities()?;
        self.corruption.validate()?;
        let (a, b) = self.object_depth;
        let (c, d) = self.background_depth;
        let ok = DEPTH_RANGE.0 < a && a <= b && b + 0.2 < c && c <= d && d < DEPTH_RANGE.1 - 0.2;
        if !ok {
            return Err(Error::Config(format!(
                "depth ranges {:?} / {:?} must be ordered inside the sensor range",
                self.object_depth, self.background_depth
            )));
        }
        Ok(())
    }
}

fn color(rng: &mut impl Rng, lo: f64, hi: f64) -> [f64; 3] {
    [0; 3].map(|_| rng.random_range(lo..hi))
}

fn sample_shape(kind: ObjectKind, rng: &mut impl Rng) -> Primitive {
    match kind {
        ObjectKind::Sphere => Primitive::Sphere { radius: rng.random_range(0.03..0.045) },
        ObjectKind::Cylinder => {
            Primitive::Cylinder { radius: rng.random_range(0.025..0.04), height: rng.random_range(0.08..0.14) }
        }
        ObjectKind::CappedCone => Primitive::CappedCone {
            bottom_radius: rng.random_range(0.02..0.03),
            top_radius: rng.random_range(0.035..0.045),
            height: rng.random_range(0.09..0.13),
        },
        ObjectKind::Box => Primitive::Box {
            half_x: rng.random_range(0.02..0.035),
            half_z: rng.random_range(0.02..0.035),
            height: rng.random_range(0.08..0.13),
        },
        ObjectKind::StemGlass => Primitive::StemGlass {
            foot_radius: rng.random_range(0.025..0.035),
            foot_height: 0.006,
            stem_radius: rng.random_range(0.004..0.007),
            stem_height: rng.random_range(0.04..0.06),
            bowl_bottom_radius: rng.random_range(0.015..0.025),
            bowl_top_radius: rng.random_range(0.035..0.045),
            bowl_height: rng.random_range(0.05..0.07),
        },
    }
}

/// Rotation taking the object's local up axis to the image's up direction.
pub fn upright() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
}

/// One draw from `dist`, with the object family given.
pub fn sample_spec_of_kind(dist: &SpecDistribution, kind: ObjectKind, rng: &mut impl Rng) -> Result<SceneSpec> {
    let intrinsics = CameraIntrinsics::centered(dist.width, dist.height, dist.focal_ratio)?;
    let shape = sample_shape(kind, rng);
    let z = rng.random_range(dist.object_depth.0..=dist.object_depth.1);
    let center = Vec3::new(rng.random_range(-0.03..0.03) * z, rng.random_range(-0.03..0.03) * z, z);
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let tilt = Rotation3::from_euler_angles(rng.random_range(-0.3..0.3), 0.0, rng.random_range(-0.2..0.2));
    let spin = Rotation3::from_axis_angle(&Vec3::y_axis(), yaw);
    let rotation = tilt.matrix() * upright() * spin.matrix();
    // Palm to one side of the object in the image, expressed in the
    // object's spun frame.
    let side = if rng.random_bool(0.5) { 0.0 } else { std::f64::consts::PI };
    let azimuth = side + rng.random_range(-0.7..0.7);
    let hand = GripParams {
        angle: azimuth + yaw,
        height: rng.random_range(0.0..=1.0),
        spread: rng.random_range(0.8..1.2),
        wrist_offset: rng.random_range(0.05..0.08),
    };
    let bg_depth = rng.random_range(dist.background_depth.0..=dist.background_depth.1);
    let distractors = std::array::from_fn(|i| {
        let bz = rng.random_range(z + 0.15..bg_depth - 0.1);
        let sign = if i == 0 { -1.0 } else { 1.0 };
        DistractorBox {
            center: Vec3::new(sign * rng.random_range(0.1..0.25) * bz, rng.random_range(-0.12..0.12) * bz, bz),
            half_extent: Vec3::new(
                rng.random_range(0.03..0.06),
                rng.random_range(0.03..0.08),
                rng.random_range(0.03..0.06),
            ),
            yaw: rng.random_range(-0.8..0.8),
            color: color(rng, 0.2, 0.9),
        }
    });
    let a = color(rng, 0.4, 0.9);
    let b = color(rng, 0.1, 0.4);
    Ok(SceneSpec {
        object: PlacedObject { shape, pose: Pose { rotation, center } },
        object_color: color(rng, 0.75, 0.95),
        hand: Some(hand),
        skin_color: [rng.random_range(0.7..0.9), rng.random_range(0.5..0.65), rng.random_range(0.4..0.5)],
        background: Background {
            depth: bg_depth,
            slope_x: rng.random_range(-0.15..0.15),
            slope_y: rng.random_range(-0.15..0.15),
            checker_size: rng.random_range(0.04..0.08),
            colors: [a, b],
            distractors,
        },
        intrinsics,
        corruption: dist.corruption,
        seed: rng.random(),
    })
}

/// One draw from `dist`.
pub fn sample_spec(dist: &SpecDistribution, rng: &mut impl Rng) -> Result<SceneSpec> {
    let kind = dist.families.sample(rng)?;
    sample_spec_of_kind(dist, kind, rng)
}

/// Renders and corrupts a spec into a full record.
pub fn build_record(spec: &SceneSpec) -> Result<SceneRecord> {
    let keypoints = spec.keypoints()?.ok_or_else(|| Error::DegenerateSpec("a scene record needs a hand".into()))?;
    let r = render_perfect(spec)?;
    let depth_raw = corrupt_depth(&r.depth, &r.see_through, &r.mask_obj, &spec.corruption, corruption_seed(spec.seed))?;
    Ok(SceneRecord {
        rgb: r.rgb,
        depth_raw,
        depth_gt: r.depth,
        mask_obj: r.mask_obj,
        mask_hand: r.mask_hand,
        keypoints,
        intrinsics: spec.intrinsics,
    })
}

fn corruption_seed(seed: u64) -> u64 {
    seed ^ 0xC0FF_EE00_D15E_A5E5
}

/// Attempts per scene before giving up on a seed.
const MAX_ATTEMPTS: usize = 64;

/// Deterministic scene for `seed`: specs are redrawn from the same stream
/// until one renders with enough visible object pixels.
pub fn generate_scene(
    dist: &SpecDistribution,
    kind: Option<ObjectKind>,
    seed: u64,
) -> Result<(SceneSpec, SceneRecord)> {
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let spec = match kind {
            Some(k) => sample_spec_of_kind(dist, k, &mut rng)?,
            None => sample_spec(dist, &mut rng)?,
        };
        match build_record(&spec) {
            Ok(rec) if rec.mask_obj.count() >= dist.min_object_pixels && rec.depth_raw.valid_count() > 0 => {
                return Ok((spec, rec))
            }
            Ok(_) => last = Some(Error::DegenerateSpec("object too small in view".into())),
            Err(e @ (Error::DegenerateSpec(_) | Error::InvalidInput(_) | Error::DegenerateHandFrame)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::NoValidGeometry))
}
