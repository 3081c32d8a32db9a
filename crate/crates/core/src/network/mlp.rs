use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::params::{logistic, relu_backward, relu_inplace, LayoutBuilder, Linear};
use crate::{Error, Result};

/// Output activation of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Identity,
    Logistic,
}

/// Affine + rectifier stack over a flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub head: Head,
}

/// Cached activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    /// Input rows; `None` when the pass started from the first pre-activation.
    pub input: Option<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("at least one layer")
    }
}

impl Mlp {
    pub fn build(b: &mut LayoutBuilder, name: &str, dims: &[usize], head: Head) -> Self {
        let layers = dims.windows(2).enumerate().map(|(i, w)| b.linear(&format!("{name}.{i}"), w[0], w[1])).collect();
        Self { layers, head }
    }

    /// An MLP owning a fresh zero-initialised buffer.
    pub fn standalone(dims: &[usize], head: Head) -> (Self, Vec<f64>) {
        let mut b = LayoutBuilder::default();
        let m = Self::build(&mut b, "mlp", dims, head);
        (m, vec![0.0; b.total])
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].fan_in];
        d.extend(self.layers.iter().map(|l| l.fan_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    fn activate(&self, layer: usize, mut z: Array2<f64>) -> Array2<f64> {
        if layer + 1 < self.layers.len() {
            relu_inplace(&mut z);
        } else if self.head == Head::Logistic {
            z.mapv_inplace(logistic);
        }
        z
    }

    pub fn forward(&self, p: &[f64], x: ArrayView2<f64>) -> Result<MlpTape> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!("mlp input {} vs {}", x.ncols(), self.input_dim())));
        }
        let z1 = self.layers[0].forward(p, x);
        let mut tape = self.forward_from_preact(p, z1);
        tape.input = Some(x.to_owned());
        Ok(tape)
    }

    /// Continues a pass whose first-layer pre-activation was computed by the
    /// caller.
    pub fn forward_from_preact(&self, p: &[f64], z1: Array2<f64>) -> MlpTape {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let a = self.activate(0, z1.clone());
        pre.push(z1);
        post.push(a);
        for (i, l) in self.layers.iter().enumerate().skip(1) {
            let z = l.forward(p, post[i - 1].view());
            post.push(self.activate(i, z.clone()));
            pre.push(z);
        }
        MlpTape { input: None, pre, post }
    }

    fn backward_inner(&self, p: &[f64], tape: &MlpTape, dy: ArrayView2<f64>, grad: &mut [f64]) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut d = dy.to_owned();
        for i in (0..self.layers.len()).rev() {
            if i == last {
                if self.head == Head::Logistic {
                    ndarray::Zip::from(&mut d).and(&tape.post[i]).for_each(|g, &s| *g *= s * (1.0 - s));
                }
            } else {
                relu_backward(&tape.pre[i], &mut d);
            }
            if i == 0 {
                return d;
            }
            d = self.layers[i].backward(p, tape.post[i - 1].view(), d.view(), grad, true).expect("dx requested");
        }
        unreachable!("mlp has at least one layer")
    }

    /// Reverse pass returning the gradient w.r.t. the input rows.
    pub fn backward(&self, p: &[f64], tape: &MlpTape, dy: ArrayView2<f64>, grad: &mut [f64]) -> Array2<f64> {
        let dz1 = self.backward_inner(p, tape, dy, grad);
        let x = tape.input.as_ref().expect("forward pass kept its input");
        self.layers[0].backward(p, x.view(), dz1.view(), grad, true).expect("dx requested")
    }

    /// Reverse pass stopping at the first pre-activation; first-layer
    /// parameter gradients are left to the caller.
    pub fn backward_to_preact(&self, p: &[f64], tape: &MlpTape, dy: ArrayView2<f64>, grad: &mut [f64]) -> Array2<f64> {
        self.backward_inner(p, tape, dy, grad)
    }
}

/// Single-vector forward.
pub fn mlp_forward(m: &Mlp, p: &[f64], x: &[f64]) -> Result<(Vec<f64>, MlpTape)> {
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
    let tape = m.forward(p, xv)?;
    Ok((tape.output().row(0).to_vec(), tape))
}
