use serde::{Deserialize, Serialize};

use crate::{DepthImage, Error, Result, Vec3};

/// Pinhole intrinsics. Pixel `(u, v)` has its centre at `(u + 0.5, v + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics with the principal point at the image centre and a
    /// horizontal focal length of `focal_ratio * width`.
    pub fn centered(width: usize, height: usize, focal_ratio: f64) -> Result<Self> {
        let f = focal_ratio * width as f64;
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Un-normalised viewing direction of a pixel centre, scaled so `z = 1`.
    #[inline]
    pub fn pixel_direction(&self, u: usize, v: usize) -> Vec3 {
        Vec3::new((u as f64 + 0.5 - self.cx) / self.fx, (v as f64 + 0.5 - self.cy) / self.fy, 1.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// A camera ray through a pixel centre, starting at the camera origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub pixel: (usize, usize),
    /// Unit direction with `dir.z > 0`.
    pub dir: Vec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.dir * t
    }
}

pub fn pixel_ray(k: &CameraIntrinsics, u: usize, v: usize) -> Result<Ray> {
    if u >= k.width || v >= k.height {
        return Err(Error::InvalidInput(format!("pixel ({u}, {v}) outside {}x{} image", k.width, k.height)));
    }
    Ok(Ray { pixel: (u, v), dir: k.pixel_direction(u, v).normalize() })
}

/// Continuous pixel coordinates of a camera-frame point, in the same
/// convention as pixel indices (the centre of pixel `u` projects to `u`).
pub fn project(k: &CameraIntrinsics, p: &Vec3) -> (f64, f64) {
    (k.fx * p.x / p.z + k.cx - 0.5, k.fy * p.y / p.z + k.cy - 0.5)
}

/// Back-projected points with the pixel each one came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub pixels: Vec<(usize, usize)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lifts every pixel with positive depth to a camera-frame point. Depth is
/// the z coordinate of the point.
pub fn backproject(d: &DepthImage, k: &CameraIntrinsics) -> Result<PointCloud> {
    if d.width != k.width || d.height != k.height {
        return Err(Error::DimensionMismatch(format!(
            "depth {}x{} vs intrinsics {}x{}",
            d.width, d.height, k.width, k.height
        )));
    }
    let mut cloud = PointCloud::default();
    for v in 0..d.height {
        for u in 0..d.width {
            let z = d.get(u, v);
            if z > 0.0 {
                cloud.points.push(k.pixel_direction(u, v) * z);
                cloud.pixels.push((u, v));
            }
        }
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.5, 50.5, 200, 101).unwrap()
    }

    #[test]
    fn principal_pixel_looks_down_the_axis() {
        let r = pixel_ray(&k100(), 50, 50).unwrap();
        assert_eq!(r.dir, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn off_axis_ray_is_45_degrees() {
        let r = pixel_ray(&k100(), 150, 50).unwrap();
        let expect = Vec3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
        assert!((r.dir - expect).norm() < 1e-15);
    }

    #[test]
    fn out_of_bounds_pixel_is_rejected() {
        assert!(pixel_ray(&k100(), 200, 0).is_err());
        assert!(pixel_ray(&k100(), 0, 101).is_err());
    }

    #[test]
    fn invalid_intrinsics_are_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 5.0, 5.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 5.0, 10, 10).is_err());
    }

    #[test]
    fn backprojection_uses_z_depth() {
        let k = k100();
        let mut d = DepthImage::zeros(k.width, k.height);
        d.set(50, 50, 2.0);
        d.set(150, 50, 1.0);
        let cloud = backproject(&d, &k).unwrap();
        assert_eq!(cloud.points, vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(1.0, 0.0, 1.0)]);
        assert_eq!(cloud.pixels, vec![(50, 50), (150, 50)]);
    }

    #[test]
    fn empty_depth_gives_empty_cloud() {
        let k = k100();
        let cloud = backproject(&DepthImage::zeros(k.width, k.height), &k).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn reprojection_returns_to_pixel_centre() {
        let k = CameraIntrinsics::new(83.2, 91.7, 31.9, 30.2, 64, 64).unwrap();
        let mut d = DepthImage::zeros(64, 64);
        for v in 0..64 {
            for u in 0..64 {
                d.set(u, v, 0.3 + 0.01 * ((u * 7 + v * 13) % 97) as f64);
            }
        }
        let cloud = backproject(&d, &k).unwrap();
        for (p, &(u, v)) in cloud.points.iter().zip(&cloud.pixels) {
            let (pu, pv) = project(&k, p);
            assert!((pu - u as f64).abs() < 1e-9 && (pv - v as f64).abs() < 1e-9);
        }
    }
}
