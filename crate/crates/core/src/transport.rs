//! Fixed-source discrete-ordinates transport: diamond-difference sweeps
//! wrapped in unaccelerated source iteration, with within-group P1
//! scattering and a global neutron-balance diagnostic.

use crate::domain::{AngularQuadrature, Boundary, GroupFlux, GroupMaterial, MaterialField, SolverConfig};
use crate::error::{invalid, Error, Result};
use crate::Grid1D;

/// Angular flux storage for one sweep.
///
/// `psi_avg` is direction-major (`order × n_cells`); `psi_face` holds the
/// `n_cells + 1` face values of every direction.
#[derive(Debug, Clone)]
pub struct SweepWorkspace {
    order: usize,
    n_cells: usize,
    psi_avg: Vec<f64>,
    psi_face: Vec<f64>,
}

impl SweepWorkspace {
    pub fn new(order: usize, n_cells: usize) -> Self {
        Self {
            order,
            n_cells,
            psi_avg: vec![0.0; order * n_cells],
            psi_face: vec![0.0; order * (n_cells + 1)],
        }
    }

    /// Cell-average angular flux of direction `n`.
    pub fn psi_avg(&self, n: usize) -> &[f64] {
        &self.psi_avg[n * self.n_cells..(n + 1) * self.n_cells]
    }

    /// Face angular flux of direction `n`, left face first.
    pub fn psi_face(&self, n: usize) -> &[f64] {
        let stride = self.n_cells + 1;
        &self.psi_face[n * stride..(n + 1) * stride]
    }

    fn face_mut(&mut self, n: usize) -> &mut [f64] {
        let stride = self.n_cells + 1;
        &mut self.psi_face[n * stride..(n + 1) * stride]
    }
}

/// Partial currents through the two slab faces after a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundaryCurrents {
    pub outflow_left: f64,
    pub outflow_right: f64,
    pub inflow_left: f64,
    pub inflow_right: f64,
}

impl BoundaryCurrents {
    /// Net leakage out of the slab.
    pub fn net_leakage(&self) -> f64 {
        self.outflow_left + self.outflow_right - self.inflow_left - self.inflow_right
    }
}

const REFLECT_TOL: f64 = 1e-15;
const REFLECT_MAX_PASSES: usize = 10_000;

/// Inverts streaming plus collision for a fixed emission density.
///
/// `emission` is direction-major (`emission[n * n_cells + i]` is the full
/// right-hand side `q(x_i, μ_n)`, including the ½ angular factor). With two
/// reflective faces the boundary fluxes are iterated to convergence inside
/// the call, starting from the face values left in `ws` by the previous sweep.
pub fn sweep(
    grid: &Grid1D,
    quad: &AngularQuadrature,
    sigma_t: &[f64],
    emission: &[f64],
    left: Boundary,
    right: Boundary,
    ws: &mut SweepWorkspace,
) -> Result<BoundaryCurrents> {
    let n_cells = grid.n_cells();
    let order = quad.order();
    grid.check_len("sigma_t", sigma_t.len())?;
    if emission.len() != order * n_cells {
        return Err(invalid(format!(
            "emission has {} entries, expected {}",
            emission.len(),
            order * n_cells
        )));
    }
    if let Some((i, &s)) = sigma_t.iter().enumerate().find(|(_, &s)| !(s > 0.0)) {
        return Err(invalid(format!("total cross section must be positive, cell {i} has {s}")));
    }
    if ws.order != order || ws.n_cells != n_cells {
        *ws = SweepWorkspace::new(order, n_cells);
    }
    let half = order / 2;
    let positive = half..order;
    let negative = 0..half;

    match (left, right) {
        (Boundary::Reflective, Boundary::Reflective) => {
            let mut incoming: Vec<f64> = positive.clone().map(|n| ws.psi_face(n)[0]).collect();
            for _ in 0..REFLECT_MAX_PASSES {
                for n in positive.clone() {
                    sweep_direction(grid, quad, sigma_t, emission, n, incoming[n - half], ws);
                }
                for n in negative.clone() {
                    let reflected = ws.psi_face(quad.mirror(n))[n_cells];
                    sweep_direction(grid, quad, sigma_t, emission, n, reflected, ws);
                }
                let mut change: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for n in positive.clone() {
                    let new = ws.psi_face(quad.mirror(n))[0];
                    change = change.max((new - incoming[n - half]).abs());
                    scale = scale.max(new.abs());
                    incoming[n - half] = new;
                }
                if change <= REFLECT_TOL * scale {
                    break;
                }
            }
        }
        (Boundary::Reflective, Boundary::Vacuum) => {
            for n in negative.clone() {
                sweep_direction(grid, quad, sigma_t, emission, n, 0.0, ws);
            }
            for n in positive.clone() {
                let reflected = ws.psi_face(quad.mirror(n))[0];
                sweep_direction(grid, quad, sigma_t, emission, n, reflected, ws);
            }
        }
        (Boundary::Vacuum, right) => {
            for n in positive.clone() {
                sweep_direction(grid, quad, sigma_t, emission, n, 0.0, ws);
            }
            for n in negative.clone() {
                let incoming = match right {
                    Boundary::Vacuum => 0.0,
                    Boundary::Reflective => ws.psi_face(quad.mirror(n))[n_cells],
                };
                sweep_direction(grid, quad, sigma_t, emission, n, incoming, ws);
            }
        }
    }

    let mut currents = BoundaryCurrents::default();
    for n in 0..order {
        let weight = quad.weights()[n] * quad.mu()[n].abs();
        let face = ws.psi_face(n);
        if n >= half {
            currents.inflow_left += weight * face[0];
            currents.outflow_right += weight * face[n_cells];
        } else {
            currents.outflow_left += weight * face[0];
            currents.inflow_right += weight * face[n_cells];
        }
    }
    Ok(currents)
}

fn sweep_direction(
    grid: &Grid1D,
    quad: &AngularQuadrature,
    sigma_t: &[f64],
    emission: &[f64],
    n: usize,
    incoming: f64,
    ws: &mut SweepWorkspace,
) {
    let n_cells = grid.n_cells();
    let mu = quad.mu()[n];
    let streaming = 2.0 * mu.abs() / grid.dx();
    let q = &emission[n * n_cells..(n + 1) * n_cells];
    let mut avg = std::mem::take(&mut ws.psi_avg);
    let row = &mut avg[n * n_cells..(n + 1) * n_cells];
    let face = ws.face_mut(n);
    let mut psi_in = incoming;
    if mu > 0.0 {
        face[0] = psi_in;
        for i in 0..n_cells {
            let psi = (q[i] + streaming * psi_in) / (sigma_t[i] + streaming);
            row[i] = psi;
            psi_in = 2.0 * psi - psi_in;
            face[i + 1] = psi_in;
        }
    } else {
        face[n_cells] = psi_in;
        for i in (0..n_cells).rev() {
            let psi = (q[i] + streaming * psi_in) / (sigma_t[i] + streaming);
            row[i] = psi;
            psi_in = 2.0 * psi - psi_in;
            face[i] = psi_in;
        }
    }
    ws.psi_avg = avg;
}

/// Result of a within-group fixed-source solve.
#[derive(Debug, Clone)]
pub struct FixedSourceSolution {
    pub flux: GroupFlux,
    /// Number of transport sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    pub currents: BoundaryCurrents,
}

/// Source iteration for one energy group.
///
/// `source` is the isotropic external density `S(x)` (the ½ angular factor
/// is applied here). Iteration stops when the configured relative norm of
/// the scalar-flux change drops below `config.tolerance`; running out of
/// iterations returns the last iterate with `converged == false`.
pub fn source_iteration(
    grid: &Grid1D,
    quad: &AngularQuadrature,
    material: GroupMaterial<'_>,
    source: &[f64],
    config: &SolverConfig,
    initial: Option<&GroupFlux>,
) -> Result<FixedSourceSolution> {
    config.validate()?;
    let n_cells = grid.n_cells();
    grid.check_len("source", source.len())?;
    grid.check_len("sigma_s0", material.sigma_s0.len())?;
    grid.check_len("sigma_s1", material.sigma_s1.len())?;
    let mut flux = match initial {
        Some(f) => {
            grid.check_len("initial flux", f.phi.len())?;
            grid.check_len("initial current", f.current.len())?;
            f.clone()
        }
        None => GroupFlux::zeros(n_cells),
    };
    let order = quad.order();
    let anisotropic = material.sigma_s1.iter().any(|&v| v != 0.0);
    let mut ws = SweepWorkspace::new(order, n_cells);
    let mut emission = vec![0.0; order * n_cells];
    let mut phi_new = vec![0.0; n_cells];
    let mut current_new = vec![0.0; n_cells];

    let mut iterations = 0;
    let mut converged = false;
    let mut currents = BoundaryCurrents::default();
    while iterations < config.max_inner_iterations {
        for n in 0..order {
            let mu = quad.mu()[n];
            let row = &mut emission[n * n_cells..(n + 1) * n_cells];
            for i in 0..n_cells {
                let mut q = 0.5 * (material.sigma_s0[i] * flux.phi[i] + source[i]);
                if anisotropic {
                    q += 1.5 * material.sigma_s1[i] * mu * flux.current[i];
                }
                row[i] = q;
            }
        }
        currents = sweep(
            grid,
            quad,
            material.sigma_t,
            &emission,
            config.boundary_left,
            config.boundary_right,
            &mut ws,
        )?;
        angular_moments(quad, &ws, &mut phi_new, &mut current_new);
        iterations += 1;
        let change = config.convergence_norm.relative_change(&phi_new, &flux.phi);
        std::mem::swap(&mut flux.phi, &mut phi_new);
        std::mem::swap(&mut flux.current, &mut current_new);
        if change.is_nan() {
            return Err(Error::Numerical("source iteration produced NaN".into()));
        }
        if change < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(FixedSourceSolution {
        flux,
        iterations,
        converged,
        currents,
    })
}

/// `φ = Σ w ψ` and `J = Σ w μ ψ`, summed in fixed direction order.
fn angular_moments(quad: &AngularQuadrature, ws: &SweepWorkspace, phi: &mut [f64], current: &mut [f64]) {
    phi.fill(0.0);
    current.fill(0.0);
    for n in 0..quad.order() {
        let w = quad.weights()[n];
        let wmu = w * quad.mu()[n];
        for (i, &psi) in ws.psi_avg(n).iter().enumerate() {
            phi[i] += w * psi;
            current[i] += wmu * psi;
        }
    }
}

/// Global neutron balance of a converged fixed-source solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    pub leakage: f64,
    pub absorption: f64,
    pub production: f64,
    /// `|leakage + absorption − production| / production`.
    pub residual: f64,
}

/// Balance of group `g`: removal uses `Σ_t − Σ_g' Σ_s0^{g→g'}`, production is
/// `∫ S dx`, leakage is the net partial current through both faces.
pub fn balance_report(
    grid: &Grid1D,
    materials: &MaterialField,
    group: usize,
    solution: &FixedSourceSolution,
    source: &[f64],
) -> Result<BalanceReport> {
    grid.check_len("source", source.len())?;
    grid.check_len("flux", solution.flux.phi.len())?;
    let production = source.iter().sum::<f64>() * grid.dx();
    if production == 0.0 {
        return Err(Error::Degenerate("balance needs a nonzero source".into()));
    }
    let sigma_t = materials.sigma_t(group);
    let absorption: f64 = (0..grid.n_cells())
        .map(|i| (sigma_t[i] - materials.scatter_out(group, i)) * solution.flux.phi[i])
        .sum::<f64>()
        * grid.dx();
    let leakage = solution.currents.net_leakage();
    Ok(BalanceReport {
        leakage,
        absorption,
        production,
        residual: ((leakage + absorption - production) / production).abs(),
    })
}
