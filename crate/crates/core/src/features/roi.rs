use super::DenseFeatureMap;

/// Side of the square window sampled around a ray's pixel.
pub const ROI_WINDOW: usize = 8;
/// Pooled output is `ROI_CELLS x ROI_CELLS`.
pub const ROI_CELLS: usize = 2;

const CELL: usize = ROI_WINDOW / ROI_CELLS;
const HALF: isize = (ROI_WINDOW / 2) as isize;

#[inline]
fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Source pixels of pooled cell `(cy, cx)`; the window spans offsets
/// `-4..4` around the pixel, clamped at the image border.
fn cell_pixels(
    m: &DenseFeatureMap,
    u: usize,
    v: usize,
    cy: usize,
    cx: usize,
) -> impl Iterator<Item = (usize, usize)> + '_ {
    let y0 = v as isize - HALF + (cy * CELL) as isize;
    let x0 = u as isize - HALF + (cx * CELL) as isize;
    (0..CELL as isize)
        .flat_map(move |dy| (0..CELL as isize).map(move |dx| (clamp(x0 + dx, m.width), clamp(y0 + dy, m.height))))
}

/// Average-pools an 8x8 window into 2x2 cells and flattens cell-major:
/// `out[(cy * 2 + cx) * C + c]`.
pub fn roi_ray_feature(m: &DenseFeatureMap, u: usize, v: usize) -> Vec<f64> {
    let c = m.channels;
    let mut out = vec![0.0; ROI_CELLS * ROI_CELLS * c];
    let norm = 1.0 / (CELL * CELL) as f64;
    for cy in 0..ROI_CELLS {
        for cx in 0..ROI_CELLS {
            let o = &mut out[(cy * ROI_CELLS + cx) * c..(cy * ROI_CELLS + cx + 1) * c];
            for (x, y) in cell_pixels(m, u, v, cy, cx) {
                for (acc, f) in o.iter_mut().zip(m.at(x, y)) {
                    *acc += f;
                }
            }
            o.iter_mut().for_each(|a| *a *= norm);
        }
    }
    out
}

/// Accumulates the gradient of [`roi_ray_feature`] into `d_map` (HWC, same
/// shape as `m.data`).
pub fn roi_ray_feature_backward(m: &DenseFeatureMap, u: usize, v: usize, d_feat: &[f64], d_map: &mut [f64]) {
    let c = m.channels;
    let norm = 1.0 / (CELL * CELL) as f64;
    for cy in 0..ROI_CELLS {
        for cx in 0..ROI_CELLS {
            let g = &d_feat[(cy * ROI_CELLS + cx) * c..(cy * ROI_CELLS + cx + 1) * c];
            for (x, y) in cell_pixels(m, u, v, cy, cx) {
                let base = (y * m.width + x) * c;
                for (k, gv) in g.iter().enumerate() {
                    d_map[base + k] += norm * gv;
                }
            }
        }
    }
}
