use crate::{Error, Result, Vec3};

pub const DEFAULT_RESOLUTION: usize = 8;
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Smallest box extent along any axis, so flat or single-point clouds still
/// give cells of positive size.
const MIN_EXTENT: f64 = 1e-3;

/// Axis-aligned grid of `resolution^3` cells with per-cell point lists.
///
/// Cell `(ix, iy, iz)` covers `[origin + i * cell_size, origin + (i + 1) *
/// cell_size)` per axis and has linear id `ix + r * (iy + r * iz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: Vec3,
    pub resolution: usize,
    pub occupancy: Vec<bool>,
    pub point_lists: Vec<Vec<usize>>,
}

impl VoxelGrid {
    /// An empty grid over an explicit box.
    pub fn with_box(origin: Vec3, cell_size: Vec3, resolution: usize) -> Self {
        let n = resolution.pow(3);
        Self { origin, cell_size, resolution, occupancy: vec![false; n], point_lists: vec![Vec::new(); n] }
    }

    pub fn cell_count(&self) -> usize {
        self.occupancy.len()
    }

    pub fn upper(&self) -> Vec3 {
        self.origin + self.cell_size * self.resolution as f64
    }

    #[inline]
    pub fn linear_id(&self, c: [usize; 3]) -> usize {
        let r = self.resolution;
        c[0] + r * (c[1] + r * c[2])
    }

    #[inline]
    pub fn cell_coords(&self, id: usize) -> [usize; 3] {
        let r = self.resolution;
        [id % r, (id / r) % r, id / (r * r)]
    }

    pub fn cell_center(&self, id: usize) -> Vec3 {
        let c = self.cell_coords(id);
        self.origin
            + Vec3::new(
                (c[0] as f64 + 0.5) * self.cell_size.x,
                (c[1] as f64 + 0.5) * self.cell_size.y,
                (c[2] as f64 + 0.5) * self.cell_size.z,
            )
    }

    /// Closed box `(lo, hi)` of a cell.
    pub fn cell_box(&self, id: usize) -> (Vec3, Vec3) {
        let c = self.cell_coords(id);
        let lo = self.origin
            + Vec3::new(c[0] as f64 * self.cell_size.x, c[1] as f64 * self.cell_size.y, c[2] as f64 * self.cell_size.z);
        (lo, lo + self.cell_size)
    }

    /// Cell containing `p` under the half-open rule, with the top face of the
    /// grid clamped into the last cell. `None` outside the grid box.
    pub fn locate(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.cell_size[a];
            if !(f >= 0.0 && f <= self.resolution as f64) {
                return None;
            }
            let mut i = (f.floor() as usize).min(self.resolution - 1);
            // Agree with `cell_box` exactly when `p` sits on a cell face.
            let face = |i: usize| self.origin[a] + i as f64 * self.cell_size[a];
            if i > 0 && p[a] < face(i) {
                i -= 1;
            } else if i + 1 < self.resolution && p[a] >= face(i + 1) {
                i += 1;
            }
            c[a] = i;
        }
        Some(c)
    }

    pub fn is_occupied(&self, id: usize) -> bool {
        self.occupancy[id]
    }

    /// Ids of occupied cells in increasing order.
    pub fn occupied_ids(&self) -> Vec<usize> {
        (0..self.cell_count()).filter(|&i| self.occupancy[i]).collect()
    }

    /// Recomputes occupancy from the point lists.
    pub fn refresh_occupancy(&mut self) {
        for (occ, list) in self.occupancy.iter_mut().zip(&self.point_lists) {
            *occ = !list.is_empty();
        }
    }
}

/// Bins points into a grid spanning their bounding box grown by `margin`
/// (a fraction of the extent) on every side.
pub fn build_voxel_grid(points: &[Vec3], resolution: usize, margin: f64) -> Result<VoxelGrid> {
    if points.is_empty() {
        return Err(Error::NoValidGeometry);
    }
    if resolution == 0 || !(margin >= 0.0) {
        return Err(Error::InvalidInput(format!("resolution {resolution}, margin {margin}")));
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
        }
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mut origin = Vec3::zeros();
    let mut size = Vec3::zeros();
    for a in 0..3 {
        let mid = 0.5 * (lo[a] + hi[a]);
        let ext = (hi[a] - lo[a]).max(MIN_EXTENT);
        let full = ext * (1.0 + 2.0 * margin);
        origin[a] = mid - 0.5 * full;
        size[a] = full / resolution as f64;
    }
    let mut grid = VoxelGrid::with_box(origin, size, resolution);
    for (i, p) in points.iter().enumerate() {
        let c =
            grid.locate(p).ok_or_else(|| Error::InvalidInput(format!("point {p:?} escaped its own bounding box")))?;
        let id = grid.linear_id(c);
        grid.point_lists[id].push(i);
    }
    grid.refresh_occupancy();
    Ok(grid)
}
