use crate::{DepthImage, Ray, RayVoxelPair};

/// Ground truth for one supervised ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTarget {
    /// Perfect z-depth at the ray's pixel.
    pub depth: f64,
    /// Index of the true pair within the ray's pair list.
    pub pair: usize,
    /// Distance from the true pair's entry to the surface along the ray.
    pub offset: f64,
}

/// Per-ray targets; `None` marks a ray excluded from every loss term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupervisionTarget {
    pub rays: Vec<Option<RayTarget>>,
    pub excluded: usize,
}

impl SupervisionTarget {
    pub fn supervised(&self) -> usize {
        self.rays.len() - self.excluded
    }

    pub fn fraction(&self) -> f64 {
        if self.rays.is_empty() {
            0.0
        } else {
            self.supervised() as f64 / self.rays.len() as f64
        }
    }
}

/// A ray is supervised when its true surface point lies in one of its
/// occupied pairs (first such pair, closed interval); otherwise it is
/// excluded.
pub fn build_targets<P: AsRef<[RayVoxelPair]>>(gt: &DepthImage, rays: &[Ray], pairs: &[P]) -> SupervisionTarget {
    let mut out = SupervisionTarget::default();
    for (ray, ps) in rays.iter().zip(pairs) {
        let (u, v) = ray.pixel;
        let d = gt.get(u, v);
        let t = d / ray.dir.z;
        let hit = (d > 0.0).then(|| ps.as_ref().iter().position(|p| p.t_in <= t && t <= p.t_out)).flatten();
        match hit {
            Some(j) => out.rays.push(Some(RayTarget { depth: d, pair: j, offset: t - ps.as_ref()[j].t_in })),
            None => {
                out.rays.push(None);
                out.excluded += 1;
            }
        }
    }
    out
}
