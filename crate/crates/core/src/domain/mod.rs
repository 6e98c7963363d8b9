//! Types shared by every solver: mesh, quadrature, materials, sources,
//! fluxes, solver settings and the JSON problem schema.

mod config;
mod flux;
mod material;
mod mesh;
pub mod problem;
mod quadrature;
mod source;

pub use config::{Boundary, ConvergenceNorm, SolverConfig};
pub use flux::{FluxField, GroupFlux};
pub use material::{GroupMaterial, MaterialField};
pub use mesh::{integrate_cellwise, Grid1D};
pub use quadrature::{gauss_legendre, AngularQuadrature};
pub use source::SourceField;
