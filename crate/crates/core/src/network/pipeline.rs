use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::model::HandFeatureMode;
use super::Model;
use crate::features::{
    encode_image, encode_image_backward, encode_voxels, encode_voxels_backward, fuse_point_features,
    fuse_point_features_backward, hand_abs_feature, hand_rel_feature, positional_embedding, roi_ray_feature,
    roi_ray_feature_backward, DenseFeatureMap, EncoderTape, FusionTape, HandKeypoints, VoxelTape, HAND_FEATURE_DIM,
};
use crate::geometry::{backproject, build_voxel_grid, pixel_ray, traverse};
use crate::network::MlpTape;
use crate::{CameraIntrinsics, DepthImage, Error, Mask, Ray, RayVoxelPair, Result, RgbImage, Vec3, VoxelGrid};

/// Everything the network reads from one frame.
#[derive(Debug, Clone, Copy)]
pub struct SceneInput<'a> {
    pub rgb: &'a RgbImage,
    pub depth: &'a DepthImage,
    pub intrinsics: &'a CameraIntrinsics,
    /// Pixels whose depth is restored.
    pub mask: &'a Mask,
    pub keypoints: &'a HandKeypoints,
}

impl SceneInput<'_> {
    fn validate(&self) -> Result<()> {
        let k = self.intrinsics;
        let (w, h) = (k.width, k.height);
        let sizes = [
            ("rgb", self.rgb.width, self.rgb.height),
            ("depth", self.depth.width, self.depth.height),
            ("mask", self.mask.width, self.mask.height),
        ];
        for (name, sw, sh) in sizes {
            if (sw, sh) != (w, h) {
                return Err(Error::DimensionMismatch(format!("{name} is {sw}x{sh}, camera is {w}x{h}")));
            }
        }
        Ok(())
    }
}

/// One scored ray-voxel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub pair: RayVoxelPair,
    /// Index into the scene's occupied-voxel list.
    pub slot: usize,
    pub logit: f64,
    pub sigma: f64,
}

impl PairRecord {
    pub fn offset(&self) -> f64 {
        self.sigma * self.pair.span()
    }
}

/// Forward pass over every masked ray of a scene, with the activations the
/// reverse pass needs.
#[derive(Debug, Clone)]
pub struct SceneForward {
    pub grid: VoxelGrid,
    /// Occupied cell ids; `PairRecord::slot` indexes this list.
    pub occupied: Vec<usize>,
    pub rays: Vec<Ray>,
    /// `pairs[ray_pairs[i]]` are the pairs of `rays[i]`, front to back.
    pub ray_pairs: Vec<Range<usize>>,
    pub pairs: Vec<PairRecord>,
    dense: DenseFeatureMap,
    encoder: EncoderTape,
    fusion: FusionTape,
    /// Row of each stacked voxel-encoder input in the fused point matrix.
    stack_order: Vec<usize>,
    voxel: VoxelTape,
    voxel_feat: Array2<f64>,
    rel: Array2<f64>,
    abs: Array1<f64>,
    ray_feat: Array2<f64>,
    ray_pe: Array2<f64>,
    pair_pe: Array2<f64>,
    pair_ray: Vec<usize>,
    offset_tape: MlpTape,
    prob_tape: MlpTape,
}

impl SceneForward {
    pub fn pairs_of(&self, ray: usize) -> &[PairRecord] {
        &self.pairs[self.ray_pairs[ray].clone()]
    }

    /// Index of the highest-logit pair of `ray` (first on ties).
    pub fn selected(&self, ray: usize) -> Option<usize> {
        let r = self.ray_pairs[ray].clone();
        let mut best: Option<usize> = None;
        for i in r {
            if best.is_none_or(|b| self.pairs[i].logit > self.pairs[b].logit) {
                best = Some(i);
            }
        }
        best
    }

    /// Depth of `ray` at its selected pair, if it has any.
    pub fn ray_depth(&self, ray: usize) -> Option<f64> {
        self.selected(ray).map(|i| {
            let p = &self.pairs[i];
            (p.pair.t_in + p.offset()) * self.rays[ray].dir.z
        })
    }

    /// Decoder input of pair `i` assembled explicitly.
    pub fn pair_embedding(&self, model: &Model, i: usize) -> Vec<f64> {
        let l = model.config.embedding_layout();
        let mut e = vec![0.0; l.total];
        let r = self.pair_ray[i];
        let slot = self.pairs[i].slot;
        e[l.ray].copy_from_slice(self.ray_feat.row(r).as_slice().unwrap());
        e[l.voxel].copy_from_slice(self.voxel_feat.row(slot).as_slice().unwrap());
        e[l.hand_abs].copy_from_slice(self.abs.as_slice().unwrap());
        e[l.hand_rel].copy_from_slice(self.rel.row(slot).as_slice().unwrap());
        e[l.pe_ray].copy_from_slice(self.ray_pe.row(r).as_slice().unwrap());
        e[l.pe_voxel].copy_from_slice(self.pair_pe.row(i).as_slice().unwrap());
        e
    }
}

/// Upstream gradients of a scalar objective w.r.t. each pair's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrad {
    pub d_logit: Vec<f64>,
    pub d_sigma: Vec<f64>,
}

impl SceneGrad {
    pub fn zeros(n_pairs: usize) -> Self {
        Self { d_logit: vec![0.0; n_pairs], d_sigma: vec![0.0; n_pairs] }
    }
}

fn hand_features(mode: HandFeatureMode, kp: &HandKeypoints, centers: &[Vec3]) -> Result<(Array1<f64>, Array2<f64>)> {
    let mut rel = Array2::zeros((centers.len(), HAND_FEATURE_DIM));
    let abs = match mode {
        HandFeatureMode::Off => return Ok((Array1::zeros(HAND_FEATURE_DIM), rel)),
        HandFeatureMode::ThreeD => {
            fill_rel(&mut rel, kp, centers);
            hand_abs_feature(kp)?
        }
        HandFeatureMode::TwoD => {
            let flat = kp.flattened();
            fill_rel(&mut rel, &flat, centers);
            hand_abs_feature(&flat).unwrap_or_else(|_| vec![0.0; HAND_FEATURE_DIM])
        }
    };
    Ok((Array1::from(abs), rel))
}

fn fill_rel(rel: &mut Array2<f64>, kp: &HandKeypoints, centers: &[Vec3]) {
    for (mut row, c) in rel.outer_iter_mut().zip(centers) {
        for (d, v) in row.iter_mut().zip(hand_rel_feature(kp, c)) {
            *d = v;
        }
    }
}

/// `dst += x · W[:, cols]ᵀ`.
fn add_block_product(dst: &mut Array2<f64>, x: ArrayView2<f64>, w: ArrayView2<f64>, cols: Range<usize>) {
    general_mat_mul(1.0, &x, &w.slice(s![.., cols]).t(), 1.0, dst);
}

/// Runs the full network on every masked ray: back-projection, voxel grid,
/// image/point/voxel/hand features, traversal and both decoders.
///
/// The first decoder layer is evaluated in factored form: its input splits
/// into per-ray, per-voxel, per-pair and per-scene parts, so each part is
/// multiplied once rather than once per pair.
pub fn forward_scene(model: &Model, scene: &SceneInput) -> Result<SceneForward> {
    scene.validate()?;
    let cfg = &model.config;
    let layout = cfg.embedding_layout();
    let p = &model.params;
    let k = scene.intrinsics;

    let cloud = backproject(scene.depth, k)?;
    let grid = build_voxel_grid(&cloud.points, cfg.grid_resolution, cfg.grid_margin)?;
    let (dense, encoder) = encode_image(model, scene.rgb)?;
    let (fused, fusion) = fuse_point_features(model, &cloud, &grid, &dense)?;

    let occupied = grid.occupied_ids();
    let mut slot_of = vec![usize::MAX; grid.cell_count()];
    let mut stack_order = Vec::with_capacity(cloud.len());
    let mut ranges = Vec::with_capacity(occupied.len());
    for (slot, &id) in occupied.iter().enumerate() {
        slot_of[id] = slot;
        let start = stack_order.len();
        stack_order.extend(&grid.point_lists[id]);
        ranges.push(start..stack_order.len());
    }
    let stacked = fused.select(Axis(0), &stack_order);
    let (voxel_feat, voxel) = encode_voxels(model, &stacked, &ranges)?;
    let centers: Vec<Vec3> = occupied.iter().map(|&id| grid.cell_center(id)).collect();
    let (abs, rel) = hand_features(cfg.hand_feature, scene.keypoints, &centers)?;

    let mask_pixels: Vec<(usize, usize)> = scene.mask.pixels().collect();
    let n_rays = mask_pixels.len();
    let mut rays = Vec::with_capacity(n_rays);
    let mut ray_pairs = Vec::with_capacity(n_rays);
    let mut ray_feat = Array2::zeros((n_rays, layout.ray.len()));
    let mut ray_pe = Array2::zeros((n_rays, layout.pe_ray.len()));
    let mut raw_pairs: Vec<RayVoxelPair> = Vec::new();
    let mut pair_pe_rows: Vec<f64> = Vec::new();
    let mut pair_ray = Vec::new();
    for (ri, &(u, v)) in mask_pixels.iter().enumerate() {
        let ray = pixel_ray(k, u, v)?;
        let roi = roi_ray_feature(&dense, u, v);
        ray_feat.row_mut(ri).assign(&ndarray::ArrayView1::from(&roi));
        let pe = positional_embedding(&ray.dir, cfg.pe_octaves);
        ray_pe.row_mut(ri).assign(&ndarray::ArrayView1::from(&pe));
        let start = raw_pairs.len();
        for pair in traverse(&grid, &ray, ri) {
            let c = grid.cell_center(pair.voxel_id);
            let entry = ray.at(pair.t_in);
            let local = (entry - c).component_div(&grid.cell_size);
            pair_pe_rows.extend(positional_embedding(&local, cfg.pe_octaves));
            pair_ray.push(ri);
            raw_pairs.push(pair);
        }
        ray_pairs.push(start..raw_pairs.len());
        rays.push(ray);
    }
    let n_pairs = raw_pairs.len();
    let pair_pe = Array2::from_shape_vec((n_pairs, layout.pe_voxel.len()), pair_pe_rows).expect("shape");
    let slots: Vec<usize> = raw_pairs.iter().map(|q| slot_of[q.voxel_id]).collect();

    let preact = |mlp: &super::Mlp| -> Array2<f64> {
        let first = &mlp.layers[0];
        let w = first.w(p);
        let width = first.fan_out;
        let mut per_ray = Array2::zeros((n_rays, width));
        add_block_product(&mut per_ray, ray_feat.view(), w, layout.ray.clone());
        add_block_product(&mut per_ray, ray_pe.view(), w, layout.pe_ray.clone());
        let mut per_voxel = Array2::zeros((occupied.len(), width));
        add_block_product(&mut per_voxel, voxel_feat.view(), w, layout.voxel.clone());
        add_block_product(&mut per_voxel, rel.view(), w, layout.hand_rel.clone());
        let per_scene = w.slice(s![.., layout.hand_abs.clone()]).dot(&abs) + first.b(p);
        let mut z = Array2::zeros((n_pairs, width));
        add_block_product(&mut z, pair_pe.view(), w, layout.pe_voxel.clone());
        for (i, mut row) in z.outer_iter_mut().enumerate() {
            row += &per_ray.row(pair_ray[i]);
            row += &per_voxel.row(slots[i]);
            row += &per_scene;
        }
        z
    };
    let offset_tape = model.layout.offset_mlp.forward_from_preact(p, preact(&model.layout.offset_mlp));
    let prob_tape = model.layout.prob_mlp.forward_from_preact(p, preact(&model.layout.prob_mlp));

    let sig = offset_tape.output();
    let log = prob_tape.output();
    let pairs = raw_pairs
        .iter()
        .enumerate()
        .map(|(i, &pair)| PairRecord { pair, slot: slots[i], logit: log[[i, 0]], sigma: sig[[i, 0]] })
        .collect();

    Ok(SceneForward {
        grid,
        occupied,
        rays,
        ray_pairs,
        pairs,
        dense,
        encoder,
        fusion,
        stack_order,
        voxel,
        voxel_feat,
        rel,
        abs,
        ray_feat,
        ray_pe,
        pair_pe,
        pair_ray,
        offset_tape,
        prob_tape,
    })
}

/// Accumulates the parameter gradient of an objective whose gradients with
/// respect to every pair's logit and sigma are `g`.
pub fn backward_scene(model: &Model, fwd: &SceneForward, g: &SceneGrad, grad: &mut [f64]) -> Result<()> {
    let n_pairs = fwd.pairs.len();
    if g.d_logit.len() != n_pairs || g.d_sigma.len() != n_pairs {
        return Err(Error::DimensionMismatch(format!("gradient for {} pairs, scene has {n_pairs}", g.d_logit.len())));
    }
    let p = &model.params;
    let layout = model.config.embedding_layout();
    let n_rays = fwd.rays.len();
    let n_vox = fwd.occupied.len();
    let mut d_ray = Array2::zeros((n_rays, layout.ray.len()));
    let mut d_voxel = Array2::zeros((n_vox, layout.voxel.len()));

    let heads = [
        (&model.layout.offset_mlp, &fwd.offset_tape, &g.d_sigma),
        (&model.layout.prob_mlp, &fwd.prob_tape, &g.d_logit),
    ];
    for (mlp, tape, dy) in heads {
        if n_pairs == 0 {
            continue;
        }
        let dy = Array2::from_shape_vec((n_pairs, 1), dy.clone()).expect("column");
        let dz = mlp.backward_to_preact(p, tape, dy.view(), grad);
        let first = &mlp.layers[0];
        let width = first.fan_out;
        let mut dz_ray = Array2::<f64>::zeros((n_rays, width));
        let mut dz_vox = Array2::<f64>::zeros((n_vox, width));
        for (i, row) in dz.outer_iter().enumerate() {
            let mut r = dz_ray.row_mut(fwd.pair_ray[i]);
            r += &row;
            let mut v = dz_vox.row_mut(fwd.pairs[i].slot);
            v += &row;
        }
        let dz_scene = dz.sum_axis(Axis(0));
        {
            let mut gw = first.w_mut(grad);
            let mut acc = |cols: Range<usize>, d: &Array2<f64>, x: ArrayView2<f64>| {
                general_mat_mul(1.0, &d.t(), &x, 1.0, &mut gw.slice_mut(s![.., cols]));
            };
            acc(layout.pe_voxel.clone(), &dz, fwd.pair_pe.view());
            acc(layout.ray.clone(), &dz_ray, fwd.ray_feat.view());
            acc(layout.pe_ray.clone(), &dz_ray, fwd.ray_pe.view());
            acc(layout.voxel.clone(), &dz_vox, fwd.voxel_feat.view());
            acc(layout.hand_rel.clone(), &dz_vox, fwd.rel.view());
            let abs_row = fwd.abs.view().insert_axis(Axis(0));
            let dz_scene_col = dz_scene.view().insert_axis(Axis(1));
            general_mat_mul(1.0, &dz_scene_col, &abs_row, 1.0, &mut gw.slice_mut(s![.., layout.hand_abs.clone()]));
        }
        first.b_mut(grad).scaled_add(1.0, &dz_scene);
        let w = first.w(p);
        general_mat_mul(1.0, &dz_ray, &w.slice(s![.., layout.ray.clone()]), 1.0, &mut d_ray);
        general_mat_mul(1.0, &dz_vox, &w.slice(s![.., layout.voxel.clone()]), 1.0, &mut d_voxel);
    }

    let d_stacked = encode_voxels_backward(model, &fwd.voxel, d_voxel.view(), grad);
    let n_points = fwd.fusion.rel.nrows();
    let mut d_fused = Array2::zeros((n_points, d_stacked.ncols()));
    for (row, &src) in d_stacked.outer_iter().zip(&fwd.stack_order) {
        let mut r = d_fused.row_mut(src);
        r += &row;
    }
    let dense = &fwd.dense;
    let mut d_dense = vec![0.0; dense.data.len()];
    fuse_point_features_backward(model, &fwd.fusion, d_fused.view(), grad, &mut d_dense, dense.channels, dense.width);
    for (ri, ray) in fwd.rays.iter().enumerate() {
        let (u, v) = ray.pixel;
        roi_ray_feature_backward(dense, u, v, d_ray.row(ri).as_slice().unwrap(), &mut d_dense);
    }
    encode_image_backward(model, &fwd.encoder, &d_dense, grad);
    Ok(())
}
