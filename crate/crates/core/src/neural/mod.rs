//! Neural solution operators written against `ndarray`: dense ReLU
//! networks with hand-written backpropagation, a DeepONet, a Fourier
//! neural operator, Adam, and a versioned model file.

mod adam;
mod deeponet;
mod dense;
mod fno;
mod persist;
mod train;

use ndarray::{Array2, ArrayView2};

pub use adam::Adam;
pub use deeponet::{DeepONet, DeepONetConfig};
pub use dense::{DenseLayout, DenseNetwork};
pub use fno::{Fno, FnoConfig};
pub use persist::{load_model, model_from_bytes, model_to_bytes, save_model, LoadedModel, MODEL_VERSION};
pub use train::{train, TrainConfig, TrainOutcome, TrainState};

use crate::error::Result;
use crate::operator::{ReferenceParams, SolutionOperator};
use crate::Grid1D;

/// A trainable source-to-flux map with a flat parameter vector.
pub trait Network: Send + Sync {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Training resolution.
    fn n_cells(&self) -> usize;

    /// Row-per-sample sources to row-per-sample fluxes.
    fn forward_batch(&self, sources: ArrayView2<f64>) -> Result<Array2<f64>>;

    /// MSE over batch and cells, and its gradient in parameter order.
    fn loss_and_gradient(&self, sources: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Vec<f64>)>;

    /// Smallest |pre-activation| over every ReLU for this batch.
    fn relu_margin(&self, sources: ArrayView2<f64>) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeuralModel {
    DeepONet(DeepONet),
    Fno(Fno),
}

impl NeuralModel {
    pub fn network(&self) -> &dyn Network {
        match self {
            NeuralModel::DeepONet(m) => m,
            NeuralModel::Fno(m) => m,
        }
    }

    pub fn network_mut(&mut self) -> &mut dyn Network {
        match self {
            NeuralModel::DeepONet(m) => m,
            NeuralModel::Fno(m) => m,
        }
    }

    pub fn reference(&self) -> ReferenceParams {
        match self {
            NeuralModel::DeepONet(m) => m.reference(),
            NeuralModel::Fno(m) => m.reference(),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        match self {
            NeuralModel::DeepONet(m) => m.grid(),
            NeuralModel::Fno(m) => m.grid(),
        }
    }

    pub fn architecture(&self) -> &'static str {
        match self {
            NeuralModel::DeepONet(_) => "deeponet",
            NeuralModel::Fno(_) => "fno",
        }
    }
}

fn predict_one(net: &dyn Network, source: &[f64]) -> Result<Vec<f64>> {
    let x = ArrayView2::from_shape((1, source.len()), source).map_err(|e| crate::error::invalid(e.to_string()))?;
    Ok(net.forward_batch(x)?.into_raw_vec_and_offset().0)
}

impl SolutionOperator for NeuralModel {
    fn reference_params(&self) -> ReferenceParams {
        self.reference()
    }

    fn n_cells(&self) -> usize {
        self.network().n_cells()
    }

    fn predict(&self, source: &[f64]) -> Result<Vec<f64>> {
        predict_one(self.network(), source)
    }

    fn name(&self) -> &str {
        self.architecture()
    }
}

impl SolutionOperator for DeepONet {
    fn reference_params(&self) -> ReferenceParams {
        self.reference()
    }

    fn n_cells(&self) -> usize {
        Network::n_cells(self)
    }

    fn predict(&self, source: &[f64]) -> Result<Vec<f64>> {
        predict_one(self, source)
    }

    fn name(&self) -> &str {
        "deeponet"
    }
}

impl SolutionOperator for Fno {
    fn reference_params(&self) -> ReferenceParams {
        self.reference()
    }

    fn n_cells(&self) -> usize {
        Network::n_cells(self)
    }

    fn predict(&self, source: &[f64]) -> Result<Vec<f64>> {
        predict_one(self, source)
    }

    fn name(&self) -> &str {
        "fno"
    }
}
