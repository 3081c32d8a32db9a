use ndarray::{Array2, ArrayView2};

use super::resize::{resize_bilinear, resize_bilinear_adjoint};
use crate::network::Model;
use crate::{Error, Result, RgbImage};

/// Spatial stride of the coarsest pyramid level; image sides must be
/// multiples of it.
pub const ENCODER_STRIDE: usize = 32;

/// Dense per-pixel feature map, row-major HWC.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl DenseFeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> &[f64] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }
}

#[derive(Debug, Clone)]
struct LevelTape {
    h: usize,
    w: usize,
    patches: Array2<f64>,
    pre: Array2<f64>,
    post: Array2<f64>,
}

/// Intermediate activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct EncoderTape {
    height: usize,
    width: usize,
    levels: Vec<LevelTape>,
    concat: Array2<f64>,
}

/// Non-overlapping `s x s` patches of an HWC map as rows, columns ordered
/// `(dy, dx, channel)`.
fn gather_patches(src: &[f64], h: usize, w: usize, c: usize, s: usize) -> Array2<f64> {
    let (oh, ow) = (h / s, w / s);
    let mut out = Array2::zeros((oh * ow, s * s * c));
    for oy in 0..oh {
        for ox in 0..ow {
            let mut row = out.row_mut(oy * ow + ox);
            for dy in 0..s {
                for dx in 0..s {
                    let src_i = ((oy * s + dy) * w + ox * s + dx) * c;
                    for ch in 0..c {
                        row[(dy * s + dx) * c + ch] = src[src_i + ch];
                    }
                }
            }
        }
    }
    out
}

fn scatter_patches(d_patches: ArrayView2<f64>, w: usize, c: usize, s: usize, d_src: &mut Array2<f64>) {
    let ow = w / s;
    for (r, row) in d_patches.outer_iter().enumerate() {
        let (oy, ox) = (r / ow, r % ow);
        for dy in 0..s {
            for dx in 0..s {
                let pix = (oy * s + dy) * w + ox * s + dx;
                for ch in 0..c {
                    d_src[[pix, ch]] += row[(dy * s + dx) * c + ch];
                }
            }
        }
    }
}

/// Four-level patch pyramid (strides 4, 8, 16, 32; channels C, 2C, 3C, 4C),
/// every level resampled to quarter resolution, concatenated, reduced by a
/// 1x1 map and resized bilinearly to full resolution.
pub fn encode_image(model: &Model, rgb: &RgbImage) -> Result<(DenseFeatureMap, EncoderTape)> {
    let (h, w) = (rgb.height, rgb.width);
    if h == 0 || w == 0 || h % ENCODER_STRIDE != 0 || w % ENCODER_STRIDE != 0 {
        return Err(Error::InvalidInput(format!("image {w}x{h} is not a multiple of {ENCODER_STRIDE}")));
    }
    let p = &model.params;
    let enc = &model.layout.encoder;
    let n_levels = if model.config.multiscale { 4 } else { 1 };

    let image: Vec<f64> = rgb.data.iter().map(|&b| b as f64 / 255.0).collect();
    let mut levels: Vec<LevelTape> = Vec::with_capacity(n_levels);
    for (i, lin) in enc.levels.iter().enumerate().take(n_levels) {
        let (patches, lh, lw) = if i == 0 {
            (gather_patches(&image, h, w, 3, 4), h / 4, w / 4)
        } else {
            let prev = &levels[i - 1];
            let src = prev.post.as_slice().expect("standard layout");
            (gather_patches(src, prev.h, prev.w, prev.post.ncols(), 2), prev.h / 2, prev.w / 2)
        };
        let pre = lin.forward(p, patches.view());
        let post = pre.mapv(|x| x.max(0.0));
        levels.push(LevelTape { h: lh, w: lw, patches, pre, post });
    }

    let (qh, qw) = (h / 4, w / 4);
    let mut concat = Array2::zeros((qh * qw, enc.reduce.fan_in));
    let mut col = 0;
    for (i, lin) in enc.levels.iter().enumerate() {
        let c = lin.fan_out;
        if let Some(l) = levels.get(i) {
            let up = resize_bilinear(l.post.as_slice().expect("standard layout"), l.h, l.w, c, qh, qw);
            for (r, chunk) in up.chunks_exact(c).enumerate() {
                for (k, v) in chunk.iter().enumerate() {
                    concat[[r, col + k]] = *v;
                }
            }
        }
        col += c;
    }
    let reduced = enc.reduce.forward(p, concat.view());
    let dc = enc.reduce.fan_out;
    let dense = resize_bilinear(reduced.as_slice().expect("standard layout"), qh, qw, dc, h, w);
    Ok((
        DenseFeatureMap { height: h, width: w, channels: dc, data: dense },
        EncoderTape { height: h, width: w, levels, concat },
    ))
}

/// Accumulates parameter gradients given `d_dense`, the gradient w.r.t. the
/// dense map (same layout as [`DenseFeatureMap::data`]).
pub fn encode_image_backward(model: &Model, tape: &EncoderTape, d_dense: &[f64], grad: &mut [f64]) {
    let p = &model.params;
    let enc = &model.layout.encoder;
    let (h, w) = (tape.height, tape.width);
    let (qh, qw) = (h / 4, w / 4);
    let dc = enc.reduce.fan_out;

    let mut d_reduced = vec![0.0; qh * qw * dc];
    resize_bilinear_adjoint(d_dense, qh, qw, dc, h, w, &mut d_reduced);
    let d_reduced = Array2::from_shape_vec((qh * qw, dc), d_reduced).expect("shape");
    let d_concat = enc.reduce.backward(p, tape.concat.view(), d_reduced.view(), grad, true).expect("dx requested");

    // Gradient reaching each level's output through the aggregation.
    let mut d_post: Vec<Array2<f64>> = Vec::with_capacity(tape.levels.len());
    let mut col = 0;
    for (i, lin) in enc.levels.iter().enumerate() {
        let c = lin.fan_out;
        if let Some(l) = tape.levels.get(i) {
            let slab: Vec<f64> = d_concat
                .outer_iter()
                .flat_map(|row| row.iter().skip(col).take(c).copied().collect::<Vec<_>>())
                .collect();
            let mut d = vec![0.0; l.h * l.w * c];
            resize_bilinear_adjoint(&slab, l.h, l.w, c, qh, qw, &mut d);
            d_post.push(Array2::from_shape_vec((l.h * l.w, c), d).expect("shape"));
        }
        col += c;
    }

    for i in (0..tape.levels.len()).rev() {
        let l = &tape.levels[i];
        let mut d_pre = d_post[i].clone();
        ndarray::Zip::from(&mut d_pre).and(&l.pre).for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let d_patches = enc.levels[i].backward(p, l.patches.view(), d_pre.view(), grad, i > 0);
        if let Some(dp) = d_patches {
            let prev = &tape.levels[i - 1];
            let c = prev.post.ncols();
            scatter_patches(dp.view(), prev.w, c, 2, &mut d_post[i - 1]);
        }
    }
}
