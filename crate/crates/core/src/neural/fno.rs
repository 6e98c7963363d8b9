use std::sync::Arc;

use ndarray::{s, Array2, Array3, ArrayView2, ArrayViewMut2, ArrayViewMut3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::dense::{mse, relu, DenseLayout};
use super::Network;
use crate::error::{invalid, Error, Result};
use crate::{Grid1D, ReferenceParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FnoConfig {
    /// Channel count after lifting.
    pub width: usize,
    /// Retained Fourier modes `0..modes`.
    pub modes: usize,
    pub layers: usize,
    /// Hidden width of the projection head; `None` projects with a single
    /// affine map.
    pub head_hidden: Option<usize>,
}

impl Default for FnoConfig {
    fn default() -> Self {
        Self {
            width: 64,
            modes: 16,
            layers: 4,
            head_hidden: Some(128),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SpectralLayout {
    re: usize,
    im: usize,
    pointwise: DenseLayout,
}

/// Fourier neural operator on a uniform 1D grid. Each cell's input is
/// `(S(x_i), x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fno {
    config: FnoConfig,
    grid: Grid1D,
    reference: ReferenceParams,
    lift: DenseLayout,
    spectral: Vec<SpectralLayout>,
    head: DenseLayout,
    params: Vec<f64>,
}

struct Plans {
    n: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    real: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    scratch_fwd: Vec<Complex<f64>>,
    scratch_inv: Vec<Complex<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let spectrum = forward.make_output_vec();
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        Self {
            n,
            forward,
            inverse,
            real: vec![0.0; n],
            spectrum,
            scratch_fwd,
            scratch_inv,
        }
    }

    fn rfft(&mut self) {
        self.forward
            .process_with_scratch(&mut self.real, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("buffer sizes match the plan");
    }

    /// Unnormalized inverse; imaginary parts the real inverse cannot
    /// represent are dropped first.
    fn irfft(&mut self) {
        self.spectrum[0].im = 0.0;
        if self.n % 2 == 0 {
            self.spectrum[self.n / 2].im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut self.spectrum, &mut self.real, &mut self.scratch_inv)
            .expect("buffer sizes match the plan");
    }

    fn is_nyquist(&self, k: usize) -> bool {
        self.n % 2 == 0 && k == self.n / 2
    }
}

struct Cache {
    input: Array2<f64>,
    /// Input to spectral layer `l` at index `l`, final layer output last.
    acts: Vec<Array2<f64>>,
    spectra: Vec<(Array3<f64>, Array3<f64>)>,
    head: Vec<Array2<f64>>,
}

impl Fno {
    pub fn zeros(config: FnoConfig, grid: Grid1D, reference: ReferenceParams) -> Result<Self> {
        let (c, m) = (config.width, config.modes);
        if c == 0 || m == 0 || config.layers == 0 {
            return Err(invalid("FNO width, modes and layers must be positive"));
        }
        check_modes(m, grid.n_cells())?;
        let lift = DenseLayout::new(vec![2, c], 0)?;
        let mut offset = lift.end();
        let mut spectral = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            let re = offset;
            let im = re + m * c * c;
            let pointwise = DenseLayout::new(vec![c, c], im + m * c * c)?;
            offset = pointwise.end();
            spectral.push(SpectralLayout { re, im, pointwise });
        }
        let head_sizes = match config.head_hidden {
            Some(h) => vec![c, h, 1],
            None => vec![c, 1],
        };
        let head = DenseLayout::new(head_sizes, offset)?;
        let params = vec![0.0; head.end()];
        Ok(Self {
            config,
            grid,
            reference,
            lift,
            spectral,
            head,
            params,
        })
    }

    /// Xavier-uniform dense weights, spectral weights uniform on
    /// `[0, 1/width²)`, zero biases.
    pub fn new(config: FnoConfig, grid: Grid1D, reference: ReferenceParams, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config, grid, reference)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = model.config.width;
        let scale = 1.0 / (c * c) as f64;
        model.lift.init_xavier(&mut model.params, &mut rng);
        for layer in &model.spectral {
            let block = 2 * model.config.modes * c * c;
            for v in &mut model.params[layer.re..layer.re + block] {
                *v = scale * rng.random::<f64>();
            }
            layer.pointwise.init_xavier(&mut model.params, &mut rng);
        }
        model.head.init_xavier(&mut model.params, &mut rng);
        Ok(model)
    }

    pub fn config(&self) -> &FnoConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn reference(&self) -> ReferenceParams {
        self.reference
    }

    /// Real and imaginary spectral weights of `layer`, shaped
    /// `modes × width_in × width_out`.
    pub fn spectral_weights_mut(&mut self, layer: usize) -> (ArrayViewMut3<'_, f64>, ArrayViewMut3<'_, f64>) {
        let (m, c) = (self.config.modes, self.config.width);
        let re = self.spectral[layer].re;
        let (a, b) = self.params[re..re + 2 * m * c * c].split_at_mut(m * c * c);
        (
            ArrayViewMut3::from_shape((m, c, c), a).unwrap(),
            ArrayViewMut3::from_shape((m, c, c), b).unwrap(),
        )
    }

    /// Pointwise weight matrix and bias of `layer`.
    pub fn pointwise_mut(&mut self, layer: usize) -> (ArrayViewMut2<'_, f64>, ndarray::ArrayViewMut1<'_, f64>) {
        let layout = self.spectral[layer].pointwise.clone();
        layout.weight_mut(&mut self.params, 0)
    }

    fn coords(&self, n: usize) -> Result<Vec<f64>> {
        if n == self.grid.n_cells() {
            return Ok(self.grid.centers().to_vec());
        }
        check_modes(self.config.modes, n)?;
        Ok(Grid1D::new(self.grid.length(), n)?.centers().to_vec())
    }

    fn spectral_view(&self, offset: usize, k: usize) -> ArrayView2<'_, f64> {
        let c = self.config.width;
        let start = offset + k * c * c;
        ArrayView2::from_shape((c, c), &self.params[start..start + c * c]).unwrap()
    }

    /// Truncated spectral convolution of `h` (rows `b * n + i`).
    fn spectral_forward(
        &self,
        layer: &SpectralLayout,
        h: &Array2<f64>,
        batch: usize,
        plans: &mut Plans,
    ) -> (Array2<f64>, Array3<f64>, Array3<f64>) {
        let (n, c, m) = (plans.n, self.config.width, self.config.modes);
        let mut ur = Array3::zeros((m, batch, c));
        let mut ui = Array3::zeros((m, batch, c));
        let hv = h.view().into_shape_with_order((batch, n, c)).unwrap();
        for b in 0..batch {
            for ch in 0..c {
                for (r, &v) in plans.real.iter_mut().zip(hv.slice(s![b, .., ch])) {
                    *r = v;
                }
                plans.rfft();
                for k in 0..m {
                    ur[[k, b, ch]] = plans.spectrum[k].re;
                    ui[[k, b, ch]] = plans.spectrum[k].im;
                }
            }
        }
        let mut vr = Array3::zeros((m, batch, c));
        let mut vi = Array3::zeros((m, batch, c));
        for k in 0..m {
            let (rr, ri) = (self.spectral_view(layer.re, k), self.spectral_view(layer.im, k));
            let (a, b) = (ur.slice(s![k, .., ..]), ui.slice(s![k, .., ..]));
            vr.slice_mut(s![k, .., ..]).assign(&(a.dot(&rr) - b.dot(&ri)));
            vi.slice_mut(s![k, .., ..]).assign(&(a.dot(&ri) + b.dot(&rr)));
        }
        let mut out = Array3::zeros((batch, n, c));
        let inv_n = 1.0 / n as f64;
        for b in 0..batch {
            for o in 0..c {
                plans.spectrum.fill(Complex::new(0.0, 0.0));
                for k in 0..m {
                    plans.spectrum[k] = Complex::new(vr[[k, b, o]], vi[[k, b, o]]);
                }
                plans.irfft();
                for (dst, &v) in out.slice_mut(s![b, .., o]).iter_mut().zip(&plans.real) {
                    *dst = v * inv_n;
                }
            }
        }
        (out.into_shape_with_order((batch * n, c)).unwrap(), ur, ui)
    }

    #[allow(clippy::too_many_arguments)]
    fn spectral_backward(
        &self,
        layer: &SpectralLayout,
        gv: &Array2<f64>,
        ur: &Array3<f64>,
        ui: &Array3<f64>,
        batch: usize,
        plans: &mut Plans,
        grad: &mut [f64],
        g_in: &mut Array2<f64>,
    ) {
        let (n, c, m) = (plans.n, self.config.width, self.config.modes);
        let mut gvr = Array3::zeros((m, batch, c));
        let mut gvi = Array3::zeros((m, batch, c));
        let gv3 = gv.view().into_shape_with_order((batch, n, c)).expect("row-major gradient");
        for b in 0..batch {
            for o in 0..c {
                for (r, &v) in plans.real.iter_mut().zip(gv3.slice(s![b, .., o])) {
                    *r = v;
                }
                plans.rfft();
                for k in 0..m {
                    let weight = if k == 0 || plans.is_nyquist(k) { 1.0 } else { 2.0 } / n as f64;
                    gvr[[k, b, o]] = weight * plans.spectrum[k].re;
                    gvi[[k, b, o]] = weight * plans.spectrum[k].im;
                }
            }
        }
        let mut gur = Array3::zeros((m, batch, c));
        let mut gui = Array3::zeros((m, batch, c));
        for k in 0..m {
            let (a, b) = (ur.slice(s![k, .., ..]), ui.slice(s![k, .., ..]));
            let (ga, gb) = (gvr.slice(s![k, .., ..]), gvi.slice(s![k, .., ..]));
            let d_re = a.t().dot(&ga) + b.t().dot(&gb);
            let d_im = a.t().dot(&gb) - b.t().dot(&ga);
            accumulate(grad, layer.re + k * c * c, &d_re);
            accumulate(grad, layer.im + k * c * c, &d_im);
            let (rr, ri) = (self.spectral_view(layer.re, k), self.spectral_view(layer.im, k));
            gur.slice_mut(s![k, .., ..]).assign(&(ga.dot(&rr.t()) + gb.dot(&ri.t())));
            gui.slice_mut(s![k, .., ..]).assign(&(gb.dot(&rr.t()) - ga.dot(&ri.t())));
        }
        for b in 0..batch {
            for ch in 0..c {
                plans.spectrum.fill(Complex::new(0.0, 0.0));
                plans.spectrum[0] = Complex::new(gur[[0, b, ch]], 0.0);
                for k in 1..m {
                    plans.spectrum[k] = if plans.is_nyquist(k) {
                        Complex::new(gur[[k, b, ch]], 0.0)
                    } else {
                        Complex::new(0.5 * gur[[k, b, ch]], 0.5 * gui[[k, b, ch]])
                    };
                }
                plans.irfft();
                let mut g3 = g_in.view_mut().into_shape_with_order((batch, n, c)).unwrap();
                for (dst, &v) in g3.slice_mut(s![b, .., ch]).iter_mut().zip(&plans.real) {
                    *dst += v;
                }
            }
        }
    }

    fn lift_input(&self, sources: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (batch, n) = sources.dim();
        let coords = self.coords(n)?;
        let mut input = Array2::zeros((batch * n, 2));
        for b in 0..batch {
            for i in 0..n {
                input[[b * n + i, 0]] = sources[[b, i]];
                input[[b * n + i, 1]] = coords[i];
            }
        }
        Ok(input)
    }

    fn forward_cached(&self, sources: ArrayView2<f64>) -> Result<(Array2<f64>, Cache)> {
        let (batch, n) = sources.dim();
        let input = self.lift_input(sources)?;
        let mut plans = Plans::new(n);
        let mut acts = Vec::with_capacity(self.spectral.len() + 1);
        acts.push(self.lift.forward(&self.params, input.view()));
        let mut spectra = Vec::with_capacity(self.spectral.len());
        for layer in &self.spectral {
            let h = acts.last().unwrap();
            let (mut v, ur, ui) = self.spectral_forward(layer, h, batch, &mut plans);
            layer.pointwise.accumulate_affine(&self.params, 0, h.view(), &mut v);
            v.mapv_inplace(relu);
            acts.push(v);
            spectra.push((ur, ui));
        }
        let head = self.head.forward_cached(&self.params, acts.last().unwrap().clone());
        let out = head
            .last()
            .unwrap()
            .clone()
            .into_shape_with_order((batch, n))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        Ok((
            out,
            Cache {
                input,
                acts,
                spectra,
                head,
            },
        ))
    }

    /// Pre-activation output `spectral(h) + h W + b` of one layer for a
    /// single sample `h` of shape `n × width`.
    pub fn layer_preactivation(&self, layer: usize, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (n, c) = h.dim();
        if c != self.config.width || layer >= self.spectral.len() {
            return Err(invalid("layer input does not match the model"));
        }
        check_modes(self.config.modes, n)?;
        let mut plans = Plans::new(n);
        let h = h.to_owned();
        let l = &self.spectral[layer];
        let (mut v, _, _) = self.spectral_forward(l, &h, 1, &mut plans);
        l.pointwise.accumulate_affine(&self.params, 0, h.view(), &mut v);
        Ok(v)
    }
}

fn check_modes(modes: usize, n: usize) -> Result<()> {
    if modes > n / 2 + 1 {
        return Err(invalid(format!("{modes} modes exceed the {n}-point half spectrum")));
    }
    Ok(())
}

fn accumulate(grad: &mut [f64], offset: usize, block: &Array2<f64>) {
    for (g, v) in grad[offset..offset + block.len()].iter_mut().zip(block.iter()) {
        *g += v;
    }
}

impl Network for Fno {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    fn forward_batch(&self, sources: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(sources)?.0)
    }

    fn loss_and_gradient(&self, sources: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        if targets.dim() != sources.dim() {
            return Err(invalid("targets and sources differ in shape"));
        }
        let (batch, n) = sources.dim();
        let (pred, cache) = self.forward_cached(sources)?;
        let (loss, g) = mse(pred.view(), targets);
        let mut grad = vec![0.0; self.params.len()];
        let g = g.into_shape_with_order((batch * n, 1)).unwrap();
        let mut gh = self.head.backward(&self.params, &cache.head, g, &mut grad);
        let mut plans = Plans::new(n);
        for (l, layer) in self.spectral.iter().enumerate().rev() {
            let mut gv = gh.as_standard_layout().into_owned();
            gv.zip_mut_with(&cache.acts[l + 1], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            let h = &cache.acts[l];
            let mut g_in = layer.pointwise.affine_backward(&self.params, 0, h, &gv, &mut grad);
            let (ur, ui) = &cache.spectra[l];
            self.spectral_backward(layer, &gv, ur, ui, batch, &mut plans, &mut grad, &mut g_in);
            gh = g_in;
        }
        self.lift.affine_backward(&self.params, 0, &cache.input, &gh, &mut grad);
        Ok((loss, grad))
    }

    fn relu_margin(&self, sources: ArrayView2<f64>) -> Result<f64> {
        let (batch, n) = sources.dim();
        let input = self.lift_input(sources)?;
        let mut plans = Plans::new(n);
        let mut h = self.lift.forward(&self.params, input.view());
        let mut margin = f64::INFINITY;
        for layer in &self.spectral {
            let (mut v, _, _) = self.spectral_forward(layer, &h, batch, &mut plans);
            layer.pointwise.accumulate_affine(&self.params, 0, h.view(), &mut v);
            margin = v.iter().fold(margin, |m, x| m.min(x.abs()));
            v.mapv_inplace(relu);
            h = v;
        }
        Ok(margin.min(self.head.relu_margin(&self.params, h.view())))
    }
}
