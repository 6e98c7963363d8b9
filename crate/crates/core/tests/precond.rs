use slabnop::eigen::{power_iteration, ModelBasedInner};
use slabnop::grf::{normalize_source, sample_grf, GrfSpec};
use slabnop::operator::ExactOperator;
use slabnop::precond::{
    cp_eigen, precondition_fixed_source, recast_fixed_point, sp_eigen, GroupOperators, RecastInner,
    RecastProblem, RecastSettings,
};
use slabnop::{
    gauss_legendre, AngularQuadrature, Boundary, Grid1D, MaterialField, ReferenceParams, Result,
    SolutionOperator, SolverConfig, SourceField,
};

fn setup() -> (Grid1D, AngularQuadrature, SourceField) {
    let grid = Grid1D::new(10.0, 100).unwrap();
    let quad = gauss_legendre(32).unwrap();
    let raw = sample_grf(&GrfSpec::default().with_seed(7), &grid).unwrap();
    let src = normalize_source(&raw, &grid).unwrap();
    (grid, quad, src)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn exact(grid: &Grid1D, quad: &AngularQuadrature, bc: Boundary, tol: f64) -> ExactOperator {
    let cfg = SolverConfig::default().with_boundaries(bc).with_tolerance(tol);
    ExactOperator::new(grid.clone(), quad.clone(), ReferenceParams::default(), cfg).unwrap()
}

/// Exact operator with a smooth multiplicative error, standing in for a
/// trained network.
struct Perturbed {
    inner: ExactOperator,
    amplitude: f64,
}

impl SolutionOperator for Perturbed {
    fn reference_params(&self) -> ReferenceParams {
        self.inner.reference_params()
    }
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }
    fn predict(&self, source: &[f64]) -> Result<Vec<f64>> {
        let n = source.len() as f64;
        Ok(self
            .inner
            .predict(source)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| v * (1.0 + self.amplitude * (7.0 * i as f64 / n).sin()))
            .collect())
    }
    fn name(&self) -> &str {
        "perturbed"
    }
}

/// Relative L2 distance after scaling both vectors to unit L2 norm.
fn normalized_l2(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    a.iter().zip(b).map(|(x, y)| (x / na - y / nb).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn scatter_only_deviation_is_reproduced_exactly() {
    let (grid, quad, src) = setup();
    let op = exact(&grid, &quad, Boundary::Vacuum, 1e-12);
    let target = MaterialField::homogeneous(100, 1.0, 0.8, 0.0, 0.0).unwrap();
    let settings = RecastSettings {
        tolerance: 1e-10,
        max_iterations: 500,
        ..RecastSettings::default()
    };
    let problem = RecastProblem::new(target.clone(), ReferenceParams::default(), src.clone())
        .unwrap()
        .with_settings(settings);
    let out = recast_fixed_point(&problem, &op, &grid, None).unwrap();
    assert!(out.converged, "{out:?}");
    let cfg = SolverConfig::default().with_tolerance(1e-12);
    let direct = slabnop::transport::source_iteration(&grid, &quad, target.group(0), src.group(0), &cfg, None)
        .unwrap();
    let err = rel_l2(&out.phi, &direct.flux.phi);
    assert!(err < 1e-6, "relative L2 {err}");
}

#[test]
fn zero_deviation_hybrid_refines_in_two_sweeps() {
    let (grid, quad, src) = setup();
    let op = exact(&grid, &quad, Boundary::Vacuum, 1e-10);
    let target = MaterialField::homogeneous(100, 1.0, 0.5, 0.0, 0.0).unwrap();
    let problem = RecastProblem::new(target, ReferenceParams::default(), src).unwrap();
    let cfg = SolverConfig::default();
    let hybrid = precondition_fixed_source(&op, &problem, &grid, &quad, &cfg).unwrap();
    assert!(hybrid.converged);
    assert!(hybrid.precond.iterations <= 2);
    assert!(hybrid.refine_iterations <= 2);
}

#[test]
fn hybrid_recovers_solver_accuracy_from_poor_operator() {
    let (grid, quad, src) = setup();
    let op = Perturbed {
        inner: exact(&grid, &quad, Boundary::Vacuum, 1e-10),
        amplitude: 0.02,
    };
    let target =
        MaterialField::single_group(vec![1.2; 100], vec![0.8; 100], vec![0.3; 100], vec![0.0; 100]).unwrap();
    let problem = RecastProblem::new(target.clone(), ReferenceParams::default(), src.clone()).unwrap();
    let cfg = SolverConfig::default();
    let hybrid = precondition_fixed_source(&op, &problem, &grid, &quad, &cfg).unwrap();
    let cold = slabnop::transport::source_iteration(&grid, &quad, target.group(0), src.group(0), &cfg, None)
        .unwrap();
    assert!(hybrid.converged && cold.converged);
    let standalone = rel_l2(&hybrid.precond.phi, &cold.flux.phi);
    let fin = normalized_l2(&hybrid.flux.phi, &cold.flux.phi);
    assert!(standalone > 2e-3, "standalone {standalone}");
    assert!(fin < 2.0 * cfg.tolerance, "final {fin} (raw {})", rel_l2(&hybrid.flux.phi, &cold.flux.phi));
    assert!(hybrid.refine_iterations < cold.iterations);
}

fn one_group(n: usize, st: f64, ss: f64, nsf: f64) -> MaterialField {
    MaterialField::homogeneous(n, st, ss, 0.0, nsf).unwrap()
}

#[test]
fn recast_inner_plugs_into_power_iteration() {
    let (grid, quad, _) = setup();
    let m = one_group(100, 1.0, 0.5, 0.3);
    let cfg = SolverConfig::default().with_tolerance(1e-10);
    let model = ModelBasedInner {
        grid: &grid,
        quadrature: &quad,
        materials: &m,
        config: &cfg,
    };
    let a = power_iteration(&grid, &m, &cfg, &model, None).unwrap();
    let op = exact(&grid, &quad, Boundary::Vacuum, 1e-13);
    let ops: [&dyn SolutionOperator; 1] = [&op];
    let recast = RecastInner {
        ops: GroupOperators::new(&ops, 1).unwrap(),
        grid: &grid,
        materials: &m,
        settings: RecastSettings {
            tolerance: 1e-12,
            ..RecastSettings::default()
        },
    };
    let b = power_iteration(&grid, &m, &cfg, &recast, None).unwrap();
    assert!(a.converged && b.converged);
    assert!((a.k - b.k).abs() < 1e-8, "{} vs {}", a.k, b.k);
}

#[test]
fn sp_stage_one_hits_infinite_medium_k() {
    let grid = Grid1D::new(10.0, 50).unwrap();
    let quad = gauss_legendre(8).unwrap();
    let m = one_group(50, 1.0, 0.5, 0.9);
    let cfg = SolverConfig::default()
        .with_boundaries(Boundary::Reflective)
        .with_tolerance(1e-8);
    let op = exact(&grid, &quad, Boundary::Reflective, 1e-12);
    let settings = RecastSettings {
        tolerance: 1e-10,
        ..RecastSettings::default()
    };
    let out = sp_eigen(&[&op], &grid, &quad, &m, &cfg, &settings).unwrap();
    let k1 = out.diagnostics.stage1_k.unwrap();
    assert!((k1 - 1.8).abs() < 1e-6, "stage 1 k {k1}");
    assert!((out.solution.k - 1.8).abs() < 1e-6);
    assert!(!out.diagnostics.fallback);
}

#[test]
fn sp_and_cp_agree_without_deviation() {
    let (grid, quad, _) = setup();
    let m = one_group(100, 1.0, 0.5, 0.3);
    let cfg = SolverConfig::default().with_tolerance(1e-12);
    let op = exact(&grid, &quad, Boundary::Vacuum, 1e-13);
    let settings = RecastSettings {
        tolerance: 1e-12,
        ..RecastSettings::default()
    };
    let sp = sp_eigen(&[&op], &grid, &quad, &m, &cfg, &settings).unwrap();
    let cp = cp_eigen(&[&op], &grid, &quad, &m, &cfg, &settings).unwrap();
    assert!((sp.solution.k - cp.solution.k).abs() < 1e-10);
}

#[test]
fn three_group_sp_matches_cold_start() {
    let grid = Grid1D::new(10.0, 100).unwrap();
    let quad = gauss_legendre(32).unwrap();
    let scatter = vec![vec![0.024, 0.171, 0.033], vec![0.0, 0.6, 0.275], vec![0.0, 0.0, 2.0]];
    let nsf = [3.0 * 0.006, 2.5 * 0.06, 2.0 * 0.9];
    let m = MaterialField::homogeneous_multigroup(100, &[0.24, 0.975, 3.0], &scatter, &nsf, &[0.96, 0.04, 0.0])
        .unwrap();
    let cfg = SolverConfig::default();
    let model = ModelBasedInner {
        grid: &grid,
        quadrature: &quad,
        materials: &m,
        config: &cfg,
    };
    let cold = power_iteration(&grid, &m, &cfg, &model, None).unwrap();
    let op = exact(&grid, &quad, Boundary::Vacuum, 1e-8);
    let sp = sp_eigen(&[&op], &grid, &quad, &m, &cfg, &RecastSettings::default()).unwrap();
    assert!(sp.solution.converged);
    assert!((sp.solution.k - cold.k).abs() < 5e-4, "{} vs {}", sp.solution.k, cold.k);
    assert!(sp.diagnostics.stage2_outer < cold.outer_iterations);
    assert!(sp.diagnostics.stage2_inner < cold.total_inner_iterations);
}

#[test]
fn cp_on_step_profile_matches_model_based_k() {
    let grid = Grid1D::new(10.0, 100).unwrap();
    let quad = gauss_legendre(16).unwrap();
    let step = |lo: f64, hi: f64| -> Vec<f64> {
        grid.centers().iter().map(|&x| if (3.0..7.0).contains(&x) { hi } else { lo }).collect()
    };
    let m = MaterialField::single_group(step(1.0, 1.5), step(0.5, 0.9), vec![0.0; 100], step(0.3, 0.45)).unwrap();
    let cfg = SolverConfig::default().with_tolerance(1e-6);
    let model = ModelBasedInner {
        grid: &grid,
        quadrature: &quad,
        materials: &m,
        config: &cfg,
    };
    let reference = power_iteration(&grid, &m, &cfg, &model, None).unwrap();
    let op = exact(&grid, &quad, Boundary::Vacuum, 1e-8);
    let cp = cp_eigen(&[&op], &grid, &quad, &m, &cfg, &RecastSettings::default()).unwrap();
    assert!(cp.solution.converged);
    assert!((cp.solution.k - reference.k).abs() < 1e-5, "{} vs {}", cp.solution.k, reference.k);
}
