use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};

use crate::network::Model;
use crate::{Error, Result};

/// Activations of both voxel-encoder stages over the stacked points.
#[derive(Debug, Clone)]
pub struct VoxelTape {
    input: Array2<f64>,
    ranges: Vec<Range<usize>>,
    pre1: Array2<f64>,
    arg1: Array2<usize>,
    cat: Array2<f64>,
    pre2: Array2<f64>,
    arg2: Array2<usize>,
}

/// Column-wise max over `rows` with the first attaining row on ties.
fn column_max(x: ArrayView2<f64>, rows: &Range<usize>) -> (Vec<f64>, Vec<usize>) {
    let mut best = x.row(rows.start).to_vec();
    let mut arg = vec![rows.start; x.ncols()];
    for r in rows.start + 1..rows.end {
        for (c, &v) in x.row(r).iter().enumerate() {
            if v > best[c] {
                best[c] = v;
                arg[c] = r;
            }
        }
    }
    (best, arg)
}

/// Encodes every voxel whose points occupy `ranges` of the stacked `fused`
/// matrix: a per-point map, a voxel-wise max concatenated back onto every
/// point, a second per-point map and a final voxel-wise max. Row `v` of the
/// result is the feature of `ranges[v]`.
pub fn encode_voxels(model: &Model, fused: &Array2<f64>, ranges: &[Range<usize>]) -> Result<(Array2<f64>, VoxelTape)> {
    let p = &model.params;
    let l1 = &model.layout.voxel1;
    let l2 = &model.layout.voxel2;
    if fused.ncols() != l1.fan_in {
        return Err(Error::DimensionMismatch(format!(
            "fused features have {} columns, expected {}",
            fused.ncols(),
            l1.fan_in
        )));
    }
    for (v, r) in ranges.iter().enumerate() {
        if r.is_empty() || r.end > fused.nrows() {
            return Err(Error::EmptyVoxel(v));
        }
    }
    let hid = l1.fan_out;
    let pre1 = l1.forward(p, fused.view());
    let h = pre1.mapv(|x| x.max(0.0));
    let mut cat = Array2::zeros((fused.nrows(), 2 * hid));
    cat.slice_mut(s![.., ..hid]).assign(&h);
    let mut arg1 = Array2::zeros((ranges.len(), hid));
    for (v, r) in ranges.iter().enumerate() {
        let (m, a) = column_max(h.view(), r);
        for row in r.clone() {
            for c in 0..hid {
                cat[[row, hid + c]] = m[c];
            }
        }
        for c in 0..hid {
            arg1[[v, c]] = a[c];
        }
    }
    let pre2 = l2.forward(p, cat.view());
    let g = pre2.mapv(|x| x.max(0.0));
    let out_dim = l2.fan_out;
    let mut out = Array2::zeros((ranges.len(), out_dim));
    let mut arg2 = Array2::zeros((ranges.len(), out_dim));
    for (v, r) in ranges.iter().enumerate() {
        let (m, a) = column_max(g.view(), r);
        for c in 0..out_dim {
            out[[v, c]] = m[c];
            arg2[[v, c]] = a[c];
        }
    }
    Ok((out, VoxelTape { input: fused.clone(), ranges: ranges.to_vec(), pre1, arg1, cat, pre2, arg2 }))
}

/// Single-voxel convenience over the rows of `points`.
pub fn encode_voxel(model: &Model, points: ArrayView2<f64>) -> Result<Vec<f64>> {
    if points.nrows() == 0 {
        return Err(Error::EmptyVoxel(0));
    }
    let (out, _) = encode_voxels(model, &points.to_owned(), std::slice::from_ref(&(0..points.nrows())))?;
    Ok(out.row(0).to_vec())
}

/// Reverse pass; max nodes route gradient to the recorded first attaining
/// point. Returns the gradient with respect to the stacked input.
pub fn encode_voxels_backward(
    model: &Model,
    tape: &VoxelTape,
    d_out: ArrayView2<f64>,
    grad: &mut [f64],
) -> Array2<f64> {
    let p = &model.params;
    let l1 = &model.layout.voxel1;
    let l2 = &model.layout.voxel2;
    let hid = l1.fan_out;
    let n = tape.input.nrows();
    let mut d2 = Array2::zeros((n, l2.fan_out));
    for v in 0..tape.ranges.len() {
        for c in 0..l2.fan_out {
            d2[[tape.arg2[[v, c]], c]] += d_out[[v, c]];
        }
    }
    ndarray::Zip::from(&mut d2).and(&tape.pre2).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let d_cat = l2.backward(p, tape.cat.view(), d2.view(), grad, true).expect("dx requested");
    let mut d1 = d_cat.slice(s![.., ..hid]).to_owned();
    for (v, r) in tape.ranges.iter().enumerate() {
        for c in 0..hid {
            let mut acc = 0.0;
            for row in r.clone() {
                acc += d_cat[[row, hid + c]];
            }
            d1[[tape.arg1[[v, c]], c]] += acc;
        }
    }
    ndarray::Zip::from(&mut d1).and(&tape.pre1).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    l1.backward(p, tape.input.view(), d1.view(), grad, true).expect("dx requested")
}
