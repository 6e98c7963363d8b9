//! Slab-geometry discrete-ordinates neutron transport with neural-operator
//! preconditioning.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: mesh, angular quadrature, materials, sources, fluxes and
//!   problem configuration.
//! - [`transport`]: diamond-difference sweeps and source iteration for
//!   within-group fixed-source problems.
//! - [`eigen`]: power iteration for single- and multigroup k-eigenvalue
//!   problems, with a pluggable inner solver.
//! - [`grf`]: Gaussian-random-field sources and training datasets.
//! - [`neural`]: dense networks, DeepONet and FNO with hand-written
//!   backpropagation, Adam training and model files.
//! - [`precond`]: parameter-deviation recast, recast fixed point, hybrid
//!   fixed-source preconditioning and the SP/CP eigenvalue algorithms.

pub mod domain;
pub mod eigen;
mod error;
mod io;
pub mod grf;
pub mod neural;
pub mod operator;
pub mod precond;
pub mod transport;

pub use domain::{
    gauss_legendre, integrate_cellwise, AngularQuadrature, Boundary, ConvergenceNorm, FluxField,
    Grid1D, GroupFlux, MaterialField, SolverConfig, SourceField,
};
pub use error::{Error, Result};
pub use operator::{ReferenceParams, SolutionOperator};
