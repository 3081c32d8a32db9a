use ndarray::{s, Array2, ArrayView2};

use super::DenseFeatureMap;
use crate::geometry::PointCloud;
use crate::network::Model;
use crate::{Error, Result, VoxelGrid};

/// Inputs and pre-activations of the two point embeddings.
#[derive(Debug, Clone)]
pub struct FusionTape {
    pub rel: Array2<f64>,
    pub colors: Array2<f64>,
    pub pre_xyz: Array2<f64>,
    pub pre_rgb: Array2<f64>,
    pixels: Vec<(usize, usize)>,
}

/// Per-point fused features `[P_xyz | P_rgb]`: a rectified map of the
/// point's offset from its voxel centre (in cell units) and a rectified map
/// of the dense feature at the pixel the point came from.
pub fn fuse_point_features(
    model: &Model,
    cloud: &PointCloud,
    grid: &VoxelGrid,
    dense: &DenseFeatureMap,
) -> Result<(Array2<f64>, FusionTape)> {
    let p = &model.params;
    let n = cloud.len();
    let mut rel = Array2::zeros((n, 3));
    for (i, pt) in cloud.points.iter().enumerate() {
        let c = grid.locate(pt).ok_or_else(|| Error::InvalidInput(format!("point {pt:?} outside the voxel grid")))?;
        let center = grid.cell_center(grid.linear_id(c));
        for a in 0..3 {
            rel[[i, a]] = (pt[a] - center[a]) / grid.cell_size[a];
        }
    }
    let mut colors = Array2::zeros((n, dense.channels));
    for (i, &(u, v)) in cloud.pixels.iter().enumerate() {
        if u >= dense.width || v >= dense.height {
            return Err(Error::InvalidInput(format!("pixel ({u}, {v}) outside the feature map")));
        }
        for (k, &x) in dense.at(u, v).iter().enumerate() {
            colors[[i, k]] = x;
        }
    }
    let dx = model.layout.fuse_xyz.fan_out;
    let dr = model.layout.fuse_rgb.fan_out;
    let pre_xyz = model.layout.fuse_xyz.forward(p, rel.view());
    let pre_rgb = if model.config.point_fusion {
        model.layout.fuse_rgb.forward(p, colors.view())
    } else {
        Array2::zeros((n, dr))
    };
    let mut out = Array2::zeros((n, dx + dr));
    out.slice_mut(s![.., ..dx]).assign(&pre_xyz.mapv(|x| x.max(0.0)));
    out.slice_mut(s![.., dx..]).assign(&pre_rgb.mapv(|x| x.max(0.0)));
    Ok((out, FusionTape { rel, colors, pre_xyz, pre_rgb, pixels: cloud.pixels.clone() }))
}

/// Accumulates parameter gradients and the gradient reaching the dense map.
pub fn fuse_point_features_backward(
    model: &Model,
    tape: &FusionTape,
    d_out: ArrayView2<f64>,
    grad: &mut [f64],
    d_dense: &mut [f64],
    dense_channels: usize,
    dense_width: usize,
) {
    let p = &model.params;
    let dx = model.layout.fuse_xyz.fan_out;
    let mut d_xyz = d_out.slice(s![.., ..dx]).to_owned();
    ndarray::Zip::from(&mut d_xyz).and(&tape.pre_xyz).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    model.layout.fuse_xyz.backward(p, tape.rel.view(), d_xyz.view(), grad, false);
    if !model.config.point_fusion {
        return;
    }
    let mut d_rgb = d_out.slice(s![.., dx..]).to_owned();
    ndarray::Zip::from(&mut d_rgb).and(&tape.pre_rgb).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let d_colors =
        model.layout.fuse_rgb.backward(p, tape.colors.view(), d_rgb.view(), grad, true).expect("dx requested");
    for (row, &(u, v)) in d_colors.outer_iter().zip(&tape.pixels) {
        let base = (v * dense_width + u) * dense_channels;
        for (k, g) in row.iter().enumerate() {
            d_dense[base + k] += g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_voxel_grid;
    use crate::network::ModelConfig;
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (Model, PointCloud, VoxelGrid, DenseFeatureMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Model::new(ModelConfig::default()).unwrap();
        for v in m.params.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        let mut cloud = PointCloud::default();
        for _ in 0..40 {
            cloud.points.push(Vec3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(0.5..1.0),
            ));
            cloud.pixels.push((rng.random_range(0..16), rng.random_range(0..12)));
        }
        let grid = build_voxel_grid(&cloud.points, 8, 0.05).unwrap();
        let mut dense = DenseFeatureMap::zeros(12, 16, 32);
        dense.data.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        (m, cloud, grid, dense)
    }

    #[test]
    fn output_has_16_plus_16_columns() {
        let (m, cloud, grid, dense) = setup(1);
        let (out, _) = fuse_point_features(&m, &cloud, &grid, &dense).unwrap();
        assert_eq!(out.dim(), (40, 32));
    }

    #[test]
    fn point_at_voxel_centre_maps_to_bias_image() {
        let (m, _, grid, dense) = setup(2);
        let id = grid.linear_id([3, 4, 5]);
        let cloud = PointCloud { points: vec![grid.cell_center(id)], pixels: vec![(0, 0)] };
        let (out, tape) = fuse_point_features(&m, &cloud, &grid, &dense).unwrap();
        assert!(tape.rel.iter().all(|&r| r.abs() < 1e-12));
        let b = m.layout.fuse_xyz.b(&m.params);
        for k in 0..16 {
            assert!((out[[0, k]] - b[k].max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn points_outside_the_grid_are_rejected() {
        let (m, _, grid, dense) = setup(3);
        let cloud = PointCloud { points: vec![Vec3::new(5.0, 0.0, 0.0)], pixels: vec![(0, 0)] };
        assert!(fuse_point_features(&m, &cloud, &grid, &dense).is_err());
    }

    #[test]
    fn reverse_pass_matches_central_differences() {
        let (m, cloud, grid, dense) = setup(4);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let probe = Array2::from_shape_fn((40, 32), |_| rng.random_range(-1.0..1.0));
        let f = |m: &Model, dense: &DenseFeatureMap| -> f64 {
            let (out, _) = fuse_point_features(m, &cloud, &grid, dense).unwrap();
            (&out * &probe).sum()
        };
        let (_, tape) = fuse_point_features(&m, &cloud, &grid, &dense).unwrap();
        let mut grad = vec![0.0; m.param_count()];
        let mut d_dense = vec![0.0; dense.data.len()];
        fuse_point_features_backward(&m, &tape, probe.view(), &mut grad, &mut d_dense, 32, 16);
        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
        let l = &m.layout;
        let ranges = [(l.fuse_xyz.weight, 48), (l.fuse_xyz.bias, 16), (l.fuse_rgb.weight, 512), (l.fuse_rgb.bias, 16)];
        for (start, len) in ranges {
            for _ in 0..10 {
                let i = start + rng.random_range(0..len);
                let mut mp = m.clone();
                mp.params[i] += h;
                let fp = f(&mp, &dense);
                mp.params[i] -= 2.0 * h;
                let fm = f(&mp, &dense);
                let fd = (fp - fm) / (2.0 * h);
                assert!(rel(grad[i], fd) < 1e-4, "param {i}: {} vs {fd}", grad[i]);
            }
        }
        for _ in 0..10 {
            let i = rng.random_range(0..dense.data.len());
            let mut dp = dense.clone();
            dp.data[i] += h;
            let fp = f(&m, &dp);
            dp.data[i] -= 2.0 * h;
            let fm = f(&m, &dp);
            let fd = (fp - fm) / (2.0 * h);
            assert!(rel(d_dense[i], fd) < 1e-4);
        }
    }
}
