//! k-eigenvalue power iteration.
//!
//! The outer loop builds the fission source from the previous flux, sweeps
//! the groups once in downscatter order, updates k from the ratio of
//! successive fission integrals and renormalizes the flux to a unit fission
//! source. Each within-group fixed-source problem is delegated to an
//! [`InnerSolver`], which is where the preconditioned algorithms plug in.

use serde::{Deserialize, Serialize};

use crate::domain::{AngularQuadrature, FluxField, GroupFlux, MaterialField, SolverConfig};
use crate::error::{invalid, Error, Result};
use crate::transport::source_iteration;
use crate::Grid1D;

/// Outcome of one within-group solve.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub flux: GroupFlux,
    /// Transport sweeps spent.
    pub sweeps: usize,
    /// Solution-operator evaluations spent.
    pub operator_calls: usize,
    pub converged: bool,
}

/// Solves group `group` of a fixed-source problem with isotropic external
/// density `source`, warm-started from `initial`.
pub trait InnerSolver: Send + Sync {
    fn solve(&self, group: usize, source: &[f64], initial: &GroupFlux) -> Result<InnerSolve>;
}

/// Plain source iteration on the full target materials.
#[derive(Debug, Clone)]
pub struct ModelBasedInner<'a> {
    pub grid: &'a Grid1D,
    pub quadrature: &'a AngularQuadrature,
    pub materials: &'a MaterialField,
    pub config: &'a SolverConfig,
}

impl InnerSolver for ModelBasedInner<'_> {
    fn solve(&self, group: usize, source: &[f64], initial: &GroupFlux) -> Result<InnerSolve> {
        let sol = source_iteration(
            self.grid,
            self.quadrature,
            self.materials.group(group),
            source,
            self.config,
            Some(initial),
        )?;
        Ok(InnerSolve {
            flux: sol.flux,
            sweeps: sol.iterations,
            operator_calls: 0,
            converged: sol.converged,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSolution {
    pub k: f64,
    /// Normalized so that `∫ Σ_g νΣ_f,g φ_g dx = 1`.
    pub flux: FluxField,
    pub outer_iterations: usize,
    /// Transport sweeps summed over all inner solves.
    pub total_inner_iterations: usize,
    pub operator_calls: usize,
    /// Inner solves that hit their iteration limit.
    pub unconverged_inner: usize,
    pub converged: bool,
}

/// `∫ Σ_g νΣ_f,g φ_g dx`.
pub fn fission_integral(grid: &Grid1D, materials: &MaterialField, flux: &FluxField) -> f64 {
    fission_density(materials, flux).iter().sum::<f64>() * grid.dx()
}

fn fission_density(materials: &MaterialField, flux: &FluxField) -> Vec<f64> {
    let mut density = vec![0.0; materials.n_cells()];
    for g in 0..materials.n_groups() {
        for (d, (nf, phi)) in density.iter_mut().zip(materials.nu_sigma_f(g).iter().zip(&flux.phi[g])) {
            *d += nf * phi;
        }
    }
    density
}

fn flux_change(config: &SolverConfig, new: &FluxField, old: &FluxField) -> f64 {
    let a: Vec<f64> = new.phi.iter().flatten().copied().collect();
    let b: Vec<f64> = old.phi.iter().flatten().copied().collect();
    config.convergence_norm.relative_change(&a, &b)
}

/// Power iteration for the dominant k-eigenpair. `initial` defaults to a
/// flat flux with k = 1; any positive scaling of it is absorbed by the
/// normalization.
pub fn power_iteration(
    grid: &Grid1D,
    materials: &MaterialField,
    config: &SolverConfig,
    inner: &dyn InnerSolver,
    initial: Option<(f64, &FluxField)>,
) -> Result<EigenSolution> {
    config.validate()?;
    grid.check_len("materials", materials.n_cells())?;
    if !materials.has_fission() {
        return Err(Error::Degenerate("no fissile material".into()));
    }
    if materials.has_upscatter() {
        return Err(invalid("upscattering is not supported"));
    }
    let n_groups = materials.n_groups();
    let keep_current = materials.has_anisotropy();
    let (mut k, mut flux) = match initial {
        Some((k, f)) => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(invalid(format!("initial k must be positive, got {k}")));
            }
            if f.n_groups() != n_groups || f.phi.iter().any(|r| r.len() != grid.n_cells()) {
                return Err(invalid("initial flux shape does not match materials"));
            }
            (k, f.clone())
        }
        None => (1.0, FluxField::flat(n_groups, grid.n_cells(), 1.0)),
    };
    let f0 = fission_integral(grid, materials, &flux);
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(Error::Degenerate(format!("initial fission integral is {f0}")));
    }
    flux.scale(1.0 / f0);

    let mut out = EigenSolution {
        k,
        flux: flux.clone(),
        outer_iterations: 0,
        total_inner_iterations: 0,
        operator_calls: 0,
        unconverged_inner: 0,
        converged: false,
    };
    while out.outer_iterations < config.max_outer_iterations {
        let fission = fission_density(materials, &flux);
        let mut groups: Vec<GroupFlux> = Vec::with_capacity(n_groups);
        for g in 0..n_groups {
            let chi = materials.chi()[g];
            let mut source: Vec<f64> = fission.iter().map(|f| chi * f / k).collect();
            for (from, done) in groups.iter().enumerate() {
                let s = materials.sigma_s0(from, g);
                for i in 0..source.len() {
                    source[i] += s[i] * done.phi[i];
                }
            }
            let solved = inner.solve(g, &source, &flux.group(g))?;
            out.total_inner_iterations += solved.sweeps;
            out.operator_calls += solved.operator_calls;
            out.unconverged_inner += usize::from(!solved.converged);
            groups.push(solved.flux);
        }
        let mut new_flux = FluxField::from_groups(groups, keep_current);
        let produced = fission_integral(grid, materials, &new_flux);
        if !(produced > 0.0 && produced.is_finite()) {
            return Err(Error::Degenerate(format!("fission integral became {produced}")));
        }
        // The previous flux carries a unit fission source.
        let k_new = k * produced;
        new_flux.scale(1.0 / produced);
        let dk = ((k_new - k) / k_new).abs();
        let dphi = flux_change(config, &new_flux, &flux);
        k = k_new;
        flux = new_flux;
        out.outer_iterations += 1;
        if dk < config.tolerance && dphi < config.tolerance {
            out.converged = true;
            break;
        }
    }
    out.k = k;
    out.flux = flux;
    Ok(out)
}

/// Dominant k and normalized group spectrum of the infinite medium made of
/// the material in `cell`, by inverse power iteration on the dense group
/// balance `(Σ_t − S₀ᵀ) φ = (1/k) χ (νΣ_f)ᵀ φ`.
pub fn infinite_medium_k(materials: &MaterialField, cell: usize) -> Result<(f64, Vec<f64>)> {
    if cell >= materials.n_cells() {
        return Err(invalid(format!("cell {cell} out of range")));
    }
    let g = materials.n_groups();
    let mut loss = vec![0.0; g * g];
    for to in 0..g {
        loss[to * g + to] += materials.sigma_t(to)[cell];
        for from in 0..g {
            loss[to * g + from] -= materials.sigma_s0(from, to)[cell];
        }
    }
    let nu_f: Vec<f64> = (0..g).map(|gg| materials.nu_sigma_f(gg)[cell]).collect();
    if nu_f.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("no fission in this cell".into()));
    }
    let lu = LuFactors::new(loss, g)?;
    let mut phi = vec![1.0; g];
    let mut k = 1.0;
    for _ in 0..10_000 {
        let produced: f64 = nu_f.iter().zip(&phi).map(|(a, b)| a * b).sum();
        let rhs: Vec<f64> = materials.chi().iter().map(|c| c * produced / k).collect();
        let next = lu.solve(&rhs);
        let next_produced: f64 = nu_f.iter().zip(&next).map(|(a, b)| a * b).sum();
        if !(next_produced > 0.0) {
            return Err(Error::Degenerate("fission production vanished".into()));
        }
        let k_new = k * next_produced / produced;
        let done = ((k_new - k) / k_new).abs() < 1e-15;
        k = k_new;
        phi = next;
        if done {
            break;
        }
    }
    let total: f64 = phi.iter().sum();
    Ok((k, phi.iter().map(|v| v / total).collect()))
}

struct LuFactors {
    a: Vec<f64>,
    perm: Vec<usize>,
    n: usize,
}

impl LuFactors {
    fn new(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            if a[pivot * n + col].abs() <= 1e-14 * scale {
                return Err(Error::Degenerate("singular group loss matrix".into()));
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
            }
            for row in col + 1..n {
                let f = a[row * n + col] / a[col * n + col];
                a[row * n + col] = f;
                for j in col + 1..n {
                    a[row * n + j] -= f * a[col * n + j];
                }
            }
        }
        Ok(Self { a, perm, n })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.a[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.a[i * n + j] * x[j];
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{gauss_legendre, Boundary};

    #[test]
    fn one_group_infinite_medium() {
        let m = MaterialField::homogeneous(1, 1.0, 0.5, 0.0, 0.9).unwrap();
        let (k, ratios) = infinite_medium_k(&m, 0).unwrap();
        assert!((k - 1.8).abs() < 1e-14);
        assert_eq!(ratios, vec![1.0]);
        let critical = MaterialField::homogeneous(1, 1.0, 0.5, 0.0, 0.5).unwrap();
        assert!((infinite_medium_k(&critical, 0).unwrap().0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn infinite_medium_errors() {
        let none = MaterialField::homogeneous(1, 1.0, 0.5, 0.0, 0.0).unwrap();
        assert!(matches!(infinite_medium_k(&none, 0), Err(Error::Degenerate(_))));
        let singular = MaterialField::homogeneous(1, 1.0, 1.0, 0.0, 0.3).unwrap();
        assert!(matches!(infinite_medium_k(&singular, 0), Err(Error::Degenerate(_))));
        assert!(infinite_medium_k(&none, 5).is_err());
    }

    #[test]
    fn lu_solves_permuted_system() {
        let lu = LuFactors::new(vec![0.0, 2.0, 1.0, 3.0, 1.0, 0.0, 1.0, 0.0, 4.0], 3).unwrap();
        let x = lu.solve(&[6.0, 5.0, 9.0]);
        for (got, want) in x.iter().zip([1.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-14, "{x:?}");
        }
    }

    #[test]
    fn zero_fission_is_degenerate() {
        let grid = Grid1D::new(10.0, 20).unwrap();
        let quad = gauss_legendre(4).unwrap();
        let m = MaterialField::homogeneous(20, 1.0, 0.5, 0.0, 0.0).unwrap();
        let cfg = SolverConfig::default();
        let inner = ModelBasedInner {
            grid: &grid,
            quadrature: &quad,
            materials: &m,
            config: &cfg,
        };
        let r = power_iteration(&grid, &m, &cfg, &inner, None);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn reflective_single_group_k_infinity() {
        let grid = Grid1D::new(10.0, 50).unwrap();
        let quad = gauss_legendre(8).unwrap();
        let m = MaterialField::homogeneous(50, 1.0, 0.5, 0.0, 0.9).unwrap();
        let cfg = SolverConfig::default()
            .with_boundaries(Boundary::Reflective)
            .with_tolerance(1e-6);
        let inner = ModelBasedInner {
            grid: &grid,
            quadrature: &quad,
            materials: &m,
            config: &cfg,
        };
        let sol = power_iteration(&grid, &m, &cfg, &inner, None).unwrap();
        assert!(sol.converged);
        assert!((sol.k - 1.8).abs() < 1e-4, "k = {}", sol.k);
        let norm = fission_integral(&grid, &m, &sol.flux);
        assert!((norm - 1.0).abs() < 1e-10);
        let again = power_iteration(&grid, &m, &cfg, &inner, Some((sol.k, &sol.flux))).unwrap();
        assert!(again.converged && again.outer_iterations <= 2);
    }
}
