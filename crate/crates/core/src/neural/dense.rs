use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{invalid, Result};

/// Placement of a fully connected ReLU stack inside a flat parameter
/// vector. Layer `l` stores its `in × out` weight matrix row-major followed
/// by its `out` biases; `y = x W + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLayout {
    sizes: Vec<usize>,
    offset: usize,
}

impl DenseLayout {
    pub fn new(sizes: Vec<usize>, offset: usize) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(invalid(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { sizes, offset })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn end(&self) -> usize {
        self.offset + self.n_params()
    }

    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let start = self.offset
            + self.sizes[..=l]
                .windows(2)
                .map(|w| (w[0] + 1) * w[1])
                .sum::<usize>();
        (start, start + self.sizes[l] * self.sizes[l + 1])
    }

    fn weight<'a>(&self, p: &'a [f64], l: usize) -> ArrayView2<'a, f64> {
        let (w, b) = self.layer_offsets(l);
        ArrayView2::from_shape((self.sizes[l], self.sizes[l + 1]), &p[w..b]).unwrap()
    }

    fn bias<'a>(&self, p: &'a [f64], l: usize) -> ArrayView1<'a, f64> {
        let (_, b) = self.layer_offsets(l);
        ArrayView1::from(&p[b..b + self.sizes[l + 1]])
    }

    fn grads_mut<'a>(&self, g: &'a mut [f64], l: usize) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let (w, b) = self.layer_offsets(l);
        let (gw, gb) = g[w..b + self.sizes[l + 1]].split_at_mut(b - w);
        (
            ArrayViewMut2::from_shape((self.sizes[l], self.sizes[l + 1]), gw).unwrap(),
            ArrayViewMut1::from(gb),
        )
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init_xavier<R: Rng>(&self, p: &mut [f64], rng: &mut R) {
        for l in 0..self.n_layers() {
            let (w, b) = self.layer_offsets(l);
            let a = (6.0 / (self.sizes[l] + self.sizes[l + 1]) as f64).sqrt();
            for v in &mut p[w..b] {
                *v = rng.random_range(-a..a);
            }
            p[b..b + self.sizes[l + 1]].fill(0.0);
        }
    }

    pub fn forward(&self, p: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = self.affine(p, 0, x);
        for l in 1..self.n_layers() {
            h.mapv_inplace(relu);
            h = self.affine(p, l, h.view());
        }
        h
    }

    /// `out += x W + b` for layer `l`.
    pub(crate) fn accumulate_affine(&self, p: &[f64], l: usize, x: ArrayView2<f64>, out: &mut Array2<f64>) {
        general_mat_mul(1.0, &x, &self.weight(p, l), 1.0, out);
        *out += &self.bias(p, l);
    }

    fn affine(&self, p: &[f64], l: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight(p, l));
        y += &self.bias(p, l);
        y
    }

    /// Forward pass keeping every layer input; the last entry is the
    /// network output.
    pub fn forward_cached(&self, p: &[f64], x: Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x);
        for l in 0..self.n_layers() {
            let mut h = self.affine(p, l, acts[l].view());
            if l + 1 < self.n_layers() {
                h.mapv_inplace(relu);
            }
            acts.push(h);
        }
        acts
    }

    /// Accumulates parameter gradients into `g` and returns the gradient
    /// with respect to the network input.
    pub fn backward(&self, p: &[f64], acts: &[Array2<f64>], grad_out: Array2<f64>, g: &mut [f64]) -> Array2<f64> {
        let mut delta = grad_out;
        for l in (0..self.n_layers()).rev() {
            if l + 1 < self.n_layers() {
                delta.zip_mut_with(&acts[l + 1], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = self.affine_backward(p, l, &acts[l], &delta, g);
        }
        delta
    }

    /// Gradient of layer `l`'s affine map: accumulates `dW`, `db` into `g`
    /// and returns the input gradient.
    pub(crate) fn affine_backward(
        &self,
        p: &[f64],
        l: usize,
        input: &Array2<f64>,
        delta: &Array2<f64>,
        g: &mut [f64],
    ) -> Array2<f64> {
        let (mut gw, mut gb) = self.grads_mut(g, l);
        gw += &input.t().dot(delta);
        gb += &delta.sum_axis(Axis(0));
        delta.dot(&self.weight(p, l).t())
    }

    pub(crate) fn weight_mut<'a>(&self, p: &'a mut [f64], l: usize) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        self.grads_mut(p, l)
    }

    /// Smallest |pre-activation| over all hidden units for input `x`.
    pub fn relu_margin(&self, p: &[f64], x: ArrayView2<f64>) -> f64 {
        let mut margin = f64::INFINITY;
        let mut h = x.to_owned();
        for l in 0..self.n_layers() {
            h = self.affine(p, l, h.view());
            if l + 1 < self.n_layers() {
                margin = h.iter().fold(margin, |m, v| m.min(v.abs()));
                h.mapv_inplace(relu);
            }
        }
        margin
    }
}

pub(crate) fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// A standalone fully connected network: ReLU hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layout: DenseLayout,
    params: Vec<f64>,
}

impl DenseNetwork {
    pub fn zeros(sizes: Vec<usize>) -> Result<Self> {
        let layout = DenseLayout::new(sizes, 0)?;
        let params = vec![0.0; layout.n_params()];
        Ok(Self { layout, params })
    }

    pub fn xavier<R: Rng>(sizes: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        net.layout.init_xavier(&mut net.params, rng);
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.layout.sizes()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.layout.sizes[0] {
            return Err(invalid(format!(
                "network expects {} inputs, got {}",
                self.layout.sizes[0],
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(self.layout.forward(&self.params, x))
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Array1<f64>> {
        let x = ArrayView2::from_shape((1, x.len()), x).unwrap();
        Ok(self.forward(x)?.row(0).to_owned())
    }

    /// MSE against `targets` and its parameter gradient.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let acts = self.layout.forward_cached(&self.params, x.to_owned());
        let out = acts.last().unwrap();
        if out.dim() != targets.dim() {
            return Err(invalid("target shape does not match network output"));
        }
        let (loss, grad_out) = mse(out.view(), targets);
        let mut g = vec![0.0; self.params.len()];
        self.layout.backward(&self.params, &acts, grad_out, &mut g);
        Ok((loss, g))
    }
}

/// Mean squared error over every entry and its gradient.
pub(crate) fn mse(pred: ArrayView2<f64>, targets: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let diff = &pred - &targets;
    let count = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    (loss, diff * (2.0 / count))
}
