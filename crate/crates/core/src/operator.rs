//! The scalar-flux solution operator `S ↦ φ` at fixed reference cross
//! sections, and its exact (model-based) realisation.

use serde::{Deserialize, Serialize};

use crate::domain::{AngularQuadrature, Boundary, MaterialField, SolverConfig};
use crate::error::{Error, Result};
use crate::transport::source_iteration;
use crate::Grid1D;

/// Spatially constant cross sections an operator was built or trained at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceParams {
    pub sigma_t: f64,
    pub sigma_s0: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            sigma_t: 1.0,
            sigma_s0: 0.5,
        }
    }
}

/// Anything that maps an isotropic source to a scalar flux at fixed
/// reference parameters: the exact solver, a DeepONet or an FNO.
pub trait SolutionOperator: Send + Sync {
    fn reference_params(&self) -> ReferenceParams;

    fn n_cells(&self) -> usize;

    fn predict(&self, source: &[f64]) -> Result<Vec<f64>>;

    fn name(&self) -> &str;
}

/// Source iteration at the reference parameters, wrapped as an operator.
#[derive(Debug, Clone)]
pub struct ExactOperator {
    grid: Grid1D,
    quadrature: AngularQuadrature,
    materials: MaterialField,
    reference: ReferenceParams,
    config: SolverConfig,
}

impl ExactOperator {
    pub fn new(
        grid: Grid1D,
        quadrature: AngularQuadrature,
        reference: ReferenceParams,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        let materials = MaterialField::homogeneous(
            grid.n_cells(),
            reference.sigma_t,
            reference.sigma_s0,
            0.0,
            0.0,
        )?;
        Ok(Self {
            grid,
            quadrature,
            materials,
            reference,
            config,
        })
    }

    /// Vacuum-boundary operator solved to `tolerance`.
    pub fn vacuum(
        grid: Grid1D,
        quadrature: AngularQuadrature,
        reference: ReferenceParams,
        tolerance: f64,
    ) -> Result<Self> {
        let config = SolverConfig::default()
            .with_tolerance(tolerance)
            .with_boundaries(Boundary::Vacuum);
        Self::new(grid, quadrature, reference, config)
    }
}

impl SolutionOperator for ExactOperator {
    fn reference_params(&self) -> ReferenceParams {
        self.reference
    }

    fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    fn predict(&self, source: &[f64]) -> Result<Vec<f64>> {
        let sol = source_iteration(
            &self.grid,
            &self.quadrature,
            self.materials.group(0),
            source,
            &self.config,
            None,
        )?;
        if !sol.converged {
            return Err(Error::Numerical("exact operator solve did not converge".into()));
        }
        Ok(sol.flux.phi)
    }

    fn name(&self) -> &str {
        "exact"
    }
}
