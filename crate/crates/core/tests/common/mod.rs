#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use slabnop::neural::{DeepONet, DeepONetConfig, Fno, FnoConfig, Network};
use slabnop::{Grid1D, ReferenceParams};

/// Below this gradient magnitude the comparison is absolute.
pub const GRAD_FLOOR: f64 = 1e-4;
/// Instances with a ReLU pre-activation closer to the kink than this are
/// redrawn, since a central difference across the kink is meaningless.
pub const MIN_RELU_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub n_params: usize,
}

/// Central differences on the MSE, one parameter at a time.
pub fn finite_difference_check<N: Network>(
    model: &mut N,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    h: f64,
) -> GradCheck {
    let (_, analytic) = model.loss_and_gradient(x, y).unwrap();
    let mut worst = (0.0, 0);
    for i in 0..analytic.len() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + h;
        let plus = model.loss_and_gradient(x, y).unwrap().0;
        model.params_mut()[i] = orig - h;
        let minus = model.loss_and_gradient(x, y).unwrap().0;
        model.params_mut()[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(GRAD_FLOOR);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    GradCheck {
        max_rel_error: worst.0,
        worst_param: worst.1,
        n_params: analytic.len(),
    }
}

fn random_batch(rng: &mut ChaCha20Rng, batch: usize, n: usize) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_fn((batch, n), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((batch, n), |_| rng.random_range(-1.0..1.0));
    (x, y)
}

/// Biases are randomized too so every parameter carries gradient.
fn jitter_params<N: Network>(model: &mut N, rng: &mut ChaCha20Rng) {
    for p in model.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
}

/// A tiny randomized DeepONet with a batch whose ReLUs sit away from zero.
pub fn small_deeponet(seed: u64) -> (DeepONet, Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(3..=8);
        let cfg = DeepONetConfig {
            branch_hidden: vec![rng.random_range(2..=8)],
            trunk_hidden: vec![rng.random_range(2..=8), rng.random_range(2..=8)],
            latent: rng.random_range(1..=8),
            bias: rng.random_bool(0.5),
        };
        let grid = Grid1D::new(rng.random_range(0.5..3.0), n).unwrap();
        let mut model = DeepONet::new(cfg, grid, ReferenceParams::default(), rng.random()).unwrap();
        jitter_params(&mut model, &mut rng);
        let (x, y) = random_batch(&mut rng, 2, n);
        if model.relu_margin(x.view()).unwrap() > MIN_RELU_MARGIN {
            return (model, x, y);
        }
    }
}

/// A tiny randomized FNO; even grids with all modes kept exercise the
/// Nyquist bin.
pub fn small_fno(seed: u64) -> (Fno, Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(4..=9);
        let cfg = FnoConfig {
            width: rng.random_range(1..=4),
            modes: rng.random_range(1..=n / 2 + 1),
            layers: rng.random_range(1..=2),
            head_hidden: if rng.random_bool(0.5) { Some(rng.random_range(2..=8)) } else { None },
        };
        let grid = Grid1D::new(rng.random_range(0.5..3.0), n).unwrap();
        let mut model = Fno::new(cfg, grid, ReferenceParams::default(), rng.random()).unwrap();
        jitter_params(&mut model, &mut rng);
        let (x, y) = random_batch(&mut rng, 2, n);
        if model.relu_margin(x.view()).unwrap() > MIN_RELU_MARGIN {
            return (model, x, y);
        }
    }
}
