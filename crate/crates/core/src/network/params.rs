use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A named, contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub dims: Vec<usize>,
    pub offset: usize,
}

impl BlockInfo {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Affine map `y = W x + b` whose weight (`fan_out x fan_in`, row-major) and
/// bias live in a flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: usize,
    pub bias: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn w<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.fan_out, self.fan_in), &p[self.weight..self.weight + self.fan_out * self.fan_in])
            .expect("weight block shape")
    }

    pub fn b<'a>(&self, p: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&p[self.bias..self.bias + self.fan_out])
    }

    pub fn w_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape(
            (self.fan_out, self.fan_in),
            &mut p[self.weight..self.weight + self.fan_out * self.fan_in],
        )
        .expect("weight block shape")
    }

    pub fn b_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(&mut p[self.bias..self.bias + self.fan_out])
    }

    /// Row-batched forward: `x` is `n x fan_in`, result `n x fan_out`.
    pub fn forward(&self, p: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.fan_in);
        let mut y = Array2::zeros((x.nrows(), self.fan_out));
        y += &self.b(p);
        general_mat_mul(1.0, &x, &self.w(p).t(), 1.0, &mut y);
        y
    }

    pub fn forward_vec(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let w = self.w(p);
        let b = self.b(p);
        (0..self.fan_out)
            .map(|o| {
                let row = w.row(o);
                row.iter().zip(x).fold(b[o], |acc, (a, v)| acc + a * v)
            })
            .collect()
    }

    /// Accumulates `dW += dyᵀ x`, `db += Σ dy` into `grad` and returns
    /// `dx = dy W` when requested.
    pub fn backward(
        &self,
        p: &[f64],
        x: ArrayView2<f64>,
        dy: ArrayView2<f64>,
        grad: &mut [f64],
        want_dx: bool,
    ) -> Option<Array2<f64>> {
        debug_assert_eq!(x.nrows(), dy.nrows());
        general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut self.w_mut(grad));
        let db = dy.sum_axis(Axis(0));
        self.b_mut(grad).scaled_add(1.0, &db);
        want_dx.then(|| dy.dot(&self.w(p)))
    }
}

/// Accumulates parameter blocks into a flat layout.
#[derive(Debug, Default, Clone)]
pub struct LayoutBuilder {
    pub blocks: Vec<BlockInfo>,
    pub total: usize,
}

impl LayoutBuilder {
    pub fn block(&mut self, name: impl Into<String>, dims: Vec<usize>) -> usize {
        let offset = self.total;
        let info = BlockInfo { name: name.into(), dims, offset };
        self.total += info.len();
        self.blocks.push(info);
        offset
    }

    pub fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let weight = self.block(format!("{name}.weight"), vec![fan_out, fan_in]);
        let bias = self.block(format!("{name}.bias"), vec![fan_out]);
        Linear { weight, bias, fan_in, fan_out }
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_linear(l: &Linear, p: &mut [f64], rng: &mut impl Rng) {
    let a = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
    for w in &mut p[l.weight..l.weight + l.fan_in * l.fan_out] {
        *w = rng.random_range(-a..a);
    }
    for b in &mut p[l.bias..l.bias + l.fan_out] {
        *b = 0.0;
    }
}

pub fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|x| x.max(0.0));
}

/// `d ⊙ 1[pre > 0]`.
pub fn relu_backward(pre: &Array2<f64>, d: &mut Array2<f64>) {
    ndarray::Zip::from(d).and(pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
