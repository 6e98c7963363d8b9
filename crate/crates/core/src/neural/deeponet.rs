use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::dense::{mse, DenseLayout};
use super::Network;
use crate::error::{invalid, Result};
use crate::{Grid1D, ReferenceParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepONetConfig {
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    /// Shared output width of branch and trunk.
    pub latent: usize,
    /// Adds a trainable scalar to every prediction.
    pub bias: bool,
}

impl Default for DeepONetConfig {
    fn default() -> Self {
        Self {
            branch_hidden: vec![200, 200],
            trunk_hidden: vec![200, 200],
            latent: 100,
            bias: false,
        }
    }
}

/// Branch net on the sampled source, trunk net on the cell coordinate;
/// the flux at cell `i` is the inner product of the two outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepONet {
    config: DeepONetConfig,
    grid: Grid1D,
    reference: ReferenceParams,
    branch: DenseLayout,
    trunk: DenseLayout,
    params: Vec<f64>,
    coords: Array2<f64>,
}

impl DeepONet {
    pub fn zeros(config: DeepONetConfig, grid: Grid1D, reference: ReferenceParams) -> Result<Self> {
        if config.latent == 0 {
            return Err(invalid("latent width must be positive"));
        }
        let n = grid.n_cells();
        let mut branch_sizes = vec![n];
        branch_sizes.extend(&config.branch_hidden);
        branch_sizes.push(config.latent);
        let mut trunk_sizes = vec![1];
        trunk_sizes.extend(&config.trunk_hidden);
        trunk_sizes.push(config.latent);
        let branch = DenseLayout::new(branch_sizes, 0)?;
        let trunk = DenseLayout::new(trunk_sizes, branch.end())?;
        let n_params = trunk.end() + usize::from(config.bias);
        let coords = Array2::from_shape_vec((n, 1), grid.centers().to_vec()).unwrap();
        Ok(Self {
            config,
            grid,
            reference,
            branch,
            trunk,
            params: vec![0.0; n_params],
            coords,
        })
    }

    /// Xavier-uniform weights from `seed`, zero biases.
    pub fn new(config: DeepONetConfig, grid: Grid1D, reference: ReferenceParams, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config, grid, reference)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        model.branch.init_xavier(&mut model.params, &mut rng);
        model.trunk.init_xavier(&mut model.params, &mut rng);
        Ok(model)
    }

    pub fn config(&self) -> &DeepONetConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn reference(&self) -> ReferenceParams {
        self.reference
    }

    pub fn branch_sizes(&self) -> &[usize] {
        self.branch.sizes()
    }

    pub fn trunk_sizes(&self) -> &[usize] {
        self.trunk.sizes()
    }

    fn bias0(&self) -> f64 {
        if self.config.bias {
            self.params[self.trunk.end()]
        } else {
            0.0
        }
    }

    /// Multiplies the branch output layer (weights and biases) by `c`.
    pub fn scale_branch_output(&mut self, c: f64) {
        let sizes = self.branch.sizes();
        let last = sizes.len() - 2;
        let width = (sizes[last] + 1) * sizes[last + 1];
        let end = self.branch.end();
        for v in &mut self.params[end - width..end] {
            *v *= c;
        }
    }

    fn check(&self, sources: ArrayView2<f64>) -> Result<()> {
        if sources.ncols() != self.grid.n_cells() {
            return Err(invalid(format!(
                "DeepONet branch takes {} cells, got {}",
                self.grid.n_cells(),
                sources.ncols()
            )));
        }
        Ok(())
    }
}

impl Network for DeepONet {
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
        self.check(sources)?;
        let b = self.branch.forward(&self.params, sources);
        let t = self.trunk.forward(&self.params, self.coords.view());
        let mut out = b.dot(&t.t());
        out += self.bias0();
        Ok(out)
    }

    fn loss_and_gradient(&self, sources: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        self.check(sources)?;
        if targets.dim() != sources.dim() {
            return Err(invalid("targets and sources differ in shape"));
        }
        let b_acts = self.branch.forward_cached(&self.params, sources.to_owned());
        let t_acts = self.trunk.forward_cached(&self.params, self.coords.clone());
        let (b, t) = (b_acts.last().unwrap(), t_acts.last().unwrap());
        let mut pred = b.dot(&t.t());
        pred += self.bias0();
        let (loss, g) = mse(pred.view(), targets);
        let mut grad = vec![0.0; self.params.len()];
        let gb = g.dot(t);
        let gt = g.t().dot(b);
        self.branch.backward(&self.params, &b_acts, gb, &mut grad);
        self.trunk.backward(&self.params, &t_acts, gt, &mut grad);
        if self.config.bias {
            grad[self.trunk.end()] = g.sum();
        }
        Ok((loss, grad))
    }

    fn relu_margin(&self, sources: ArrayView2<f64>) -> Result<f64> {
        self.check(sources)?;
        let b = self.branch.relu_margin(&self.params, sources);
        let t = self.trunk.relu_margin(&self.params, self.coords.view());
        Ok(b.min(t))
    }
}
