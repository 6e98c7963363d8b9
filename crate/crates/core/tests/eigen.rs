use slabnop::eigen::{fission_integral, infinite_medium_k, power_iteration, ModelBasedInner};
use slabnop::{gauss_legendre, Boundary, FluxField, Grid1D, MaterialField, SolverConfig};

const SCATTER: [[f64; 3]; 3] = [[0.024, 0.171, 0.033], [0.0, 0.6, 0.275], [0.0, 0.0, 2.0]];
const NU: [f64; 3] = [3.0, 2.5, 2.0];
const SIGMA_F: [f64; 3] = [0.006, 0.06, 0.9];
const SIGMA_T: [f64; 3] = [0.24, 0.975, 3.0];
const CHI: [f64; 3] = [0.96, 0.04, 0.0];

fn three_group(n: usize) -> MaterialField {
    let scatter: Vec<Vec<f64>> = SCATTER.iter().map(|r| r.to_vec()).collect();
    let nsf: Vec<f64> = NU.iter().zip(SIGMA_F).map(|(n, f)| n * f).collect();
    MaterialField::homogeneous_multigroup(n, &SIGMA_T, &scatter, &nsf, &CHI).unwrap()
}

/// k∞ = νΣ_fᵀ A⁻¹ χ for the lower-triangular 3×3 loss operator, by forward
/// substitution on the group chain.
fn closed_form_k_inf() -> f64 {
    let nsf: Vec<f64> = NU.iter().zip(SIGMA_F).map(|(n, f)| n * f).collect();
    let mut phi = [0.0; 3];
    for g in 0..3 {
        let inflow: f64 = (0..g).map(|h| SCATTER[h][g] * phi[h]).sum();
        phi[g] = (CHI[g] + inflow) / (SIGMA_T[g] - SCATTER[g][g]);
    }
    nsf.iter().zip(phi).map(|(a, b)| a * b).sum()
}

fn solve(bc: Boundary, tol: f64, initial: Option<(f64, &FluxField)>) -> slabnop::eigen::EigenSolution {
    let grid = Grid1D::new(10.0, 100).unwrap();
    let quad = gauss_legendre(32).unwrap();
    let m = three_group(100);
    let cfg = SolverConfig::default().with_boundaries(bc).with_tolerance(tol);
    let inner = ModelBasedInner {
        grid: &grid,
        quadrature: &quad,
        materials: &m,
        config: &cfg,
    };
    let sol = power_iteration(&grid, &m, &cfg, &inner, initial).unwrap();
    assert!((fission_integral(&grid, &m, &sol.flux) - 1.0).abs() < 1e-10);
    sol
}

#[test]
fn dense_oracle_matches_closed_form() {
    let (k, ratios) = infinite_medium_k(&three_group(1), 0).unwrap();
    let oracle = closed_form_k_inf();
    assert!((k - oracle).abs() < 1e-12, "{k} vs {oracle}");
    assert!((ratios.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    assert!(ratios.iter().all(|&r| r > 0.0));
}

#[test]
fn three_group_vacuum_slab() {
    let sol = solve(Boundary::Vacuum, 1e-4, None);
    assert!(sol.converged);
    assert!((sol.k - 1.30621).abs() < 5e-3, "k = {}", sol.k);
    let (k_inf, _) = infinite_medium_k(&three_group(1), 0).unwrap();
    assert!(sol.k < k_inf);
}

#[test]
fn three_group_reflective_matches_dense_oracle() {
    let sol = solve(Boundary::Reflective, 1e-9, None);
    let (k_inf, _) = infinite_medium_k(&three_group(1), 0).unwrap();
    assert!((sol.k - k_inf).abs() < 1e-6, "{} vs {k_inf}", sol.k);
}

#[test]
fn initial_scale_does_not_change_k() {
    let base = solve(Boundary::Vacuum, 1e-10, None);
    let mut scaled = FluxField::flat(3, 100, 1.0);
    scaled.scale(1234.5);
    let other = solve(Boundary::Vacuum, 1e-10, Some((1.0, &scaled)));
    assert!((base.k - other.k).abs() < 1e-10);
    let warm = solve(Boundary::Vacuum, 1e-10, Some((base.k, &base.flux)));
    assert!(warm.converged && warm.outer_iterations <= 2);
}
