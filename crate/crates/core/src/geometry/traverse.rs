use crate::{Ray, VoxelGrid};

/// Entry-parameter nudge, as a fraction of the smallest cell edge, used to
/// decide which cell a ray enters when it starts exactly on a cell face.
pub const ENTRY_NUDGE: f64 = 1e-9;

/// A ray crossing one voxel over `[t_in, t_out]` (distances along the unit
/// ray direction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayVoxelPair {
    pub ray_id: usize,
    pub voxel_id: usize,
    pub t_in: f64,
    pub t_out: f64,
}

impl RayVoxelPair {
    #[inline]
    pub fn span(&self) -> f64 {
        self.t_out - self.t_in
    }
}

/// Occupied voxels crossed by `ray`, ordered by increasing entry distance.
pub fn traverse(g: &VoxelGrid, ray: &Ray, ray_id: usize) -> Vec<RayVoxelPair> {
    let mut out = Vec::new();
    walk(g, ray, |voxel_id, t_in, t_out| {
        if g.occupancy[voxel_id] {
            out.push(RayVoxelPair { ray_id, voxel_id, t_in, t_out });
        }
    });
    out
}

/// Every cell crossed by `ray` (occupied or not) with its entry/exit
/// distances.
pub fn traverse_all(g: &VoxelGrid, ray: &Ray) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    walk(g, ray, |id, a, b| out.push((id, a, b)));
    out
}

/// Incremental grid walk (Amanatides & Woo) from the camera origin.
fn walk(g: &VoxelGrid, ray: &Ray, mut visit: impl FnMut(usize, f64, f64)) {
    let lo = g.origin;
    let hi = g.upper();
    let d = ray.dir;
    let r = g.resolution as i64;

    let mut t_enter = 0.0f64;
    let mut t_leave = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            if !(lo[a] <= 0.0 && 0.0 < hi[a]) {
                return;
            }
        } else {
            let t1 = lo[a] / d[a];
            let t2 = hi[a] / d[a];
            t_enter = t_enter.max(t1.min(t2));
            t_leave = t_leave.min(t1.max(t2));
        }
    }
    if !(t_enter < t_leave) {
        return;
    }

    let min_cell = g.cell_size.x.min(g.cell_size.y).min(g.cell_size.z);
    let probe = d * (t_enter + ENTRY_NUDGE * min_cell);
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    for a in 0..3 {
        let f = ((probe[a] - lo[a]) / g.cell_size[a]).floor() as i64;
        cell[a] = f.clamp(0, r - 1);
        step[a] = if d[a] > 0.0 {
            1
        } else if d[a] < 0.0 {
            -1
        } else {
            0
        };
    }
    let boundary = |a: usize, c: i64, s: i64| -> f64 {
        if s == 0 {
            f64::INFINITY
        } else {
            let k = if s > 0 { c + 1 } else { c };
            (lo[a] + k as f64 * g.cell_size[a]) / d[a]
        }
    };
    for a in 0..3 {
        t_next[a] = boundary(a, cell[a], step[a]);
    }

    let mut t = t_enter;
    // Each step leaves at least one slab; 3r steps cross the whole grid.
    for _ in 0..(3 * r + 3) {
        let t_exit = t_next[0].min(t_next[1]).min(t_next[2]).min(t_leave);
        if t_exit > t {
            let id = (cell[0] + r * (cell[1] + r * cell[2])) as usize;
            visit(id, t, t_exit);
            t = t_exit;
        }
        if t_exit >= t_leave {
            return;
        }
        for a in 0..3 {
            if t_next[a] == t_exit {
                cell[a] += step[a];
                if cell[a] < 0 || cell[a] >= r {
                    return;
                }
                t_next[a] = boundary(a, cell[a], step[a]);
            }
        }
    }
}
