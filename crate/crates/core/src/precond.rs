//! Operator-preconditioned solves.
//!
//! A solution operator trained at constant reference cross sections `p*`
//! is applied to a target problem `p′` by moving the cross-section
//! deviation into the source,
//! `S′ = S + [(Σ_s0 − Σ_s0*) − (Σ_t − Σ_t*)] φ`, and iterating
//! `φ ← operator(S′)`. The result is then handed to the model-based solver
//! as its initial guess, so the final answer carries full solver accuracy
//! whatever the quality of the operator.

use serde::{Deserialize, Serialize};

use crate::domain::{
    AngularQuadrature, ConvergenceNorm, GroupFlux, MaterialField, SolverConfig, SourceField,
};
use crate::eigen::{power_iteration, EigenSolution, InnerSolve, InnerSolver, ModelBasedInner};
use crate::error::{invalid, Error, Result};
use crate::operator::{ReferenceParams, SolutionOperator};
use crate::transport::source_iteration;
use crate::Grid1D;

/// Iterate norm growth, relative to the first prediction, treated as
/// divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// `S + [(Σ_s0 − Σ_s0*) − (Σ_t − Σ_t*)] φ`, cell by cell.
pub fn recast_source(
    source: &[f64],
    phi: &[f64],
    sigma_t: &[f64],
    sigma_s0: &[f64],
    reference: ReferenceParams,
) -> Result<Vec<f64>> {
    let n = source.len();
    if phi.len() != n || sigma_t.len() != n || sigma_s0.len() != n {
        return Err(invalid("recast inputs must share one grid"));
    }
    Ok((0..n)
        .map(|i| {
            let delta = (sigma_s0[i] - reference.sigma_s0) - (sigma_t[i] - reference.sigma_t);
            source[i] + delta * phi[i]
        })
        .collect())
}

/// Iteration controls for the recast fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecastSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub convergence_norm: ConvergenceNorm,
    /// Outer-iteration cap for the operator-driven first stage of SP/CP.
    pub stage1_max_outer: usize,
}

impl Default for RecastSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 50,
            convergence_norm: ConvergenceNorm::RelativeLinf,
            stage1_max_outer: 200,
        }
    }
}

impl RecastSettings {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(invalid(format!("recast tolerance {} outside (0, 1)", self.tolerance)));
        }
        if self.max_iterations == 0 || self.stage1_max_outer == 0 {
            return Err(invalid("recast iteration limits must be positive"));
        }
        Ok(())
    }
}

/// A single-group target problem `p′` with its external source.
#[derive(Debug, Clone)]
pub struct RecastProblem {
    pub target: MaterialField,
    pub reference: ReferenceParams,
    pub source: SourceField,
    pub settings: RecastSettings,
}

impl RecastProblem {
    pub fn new(target: MaterialField, reference: ReferenceParams, source: SourceField) -> Result<Self> {
        if target.n_groups() != 1 || source.n_groups() != 1 {
            return Err(invalid("recast problems are single-group"));
        }
        if target.n_cells() != source.group(0).len() {
            return Err(invalid("source and materials differ in cell count"));
        }
        Ok(Self {
            target,
            reference,
            source,
            settings: RecastSettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: RecastSettings) -> Self {
        self.settings = settings;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecastOutcome {
    pub phi: Vec<f64>,
    /// Recast updates after the initial prediction.
    pub iterations: usize,
    pub operator_calls: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Operator evaluation at the scale it was trained on: the source is
/// divided by `∫|S| dx` and the prediction multiplied back, which is exact
/// for the linear transport operator.
pub fn predict_scaled(op: &dyn SolutionOperator, source: &[f64], dx: f64) -> Result<Vec<f64>> {
    if source.len() != op.n_cells() {
        return Err(invalid(format!(
            "operator {} expects {} cells, got {}",
            op.name(),
            op.n_cells(),
            source.len()
        )));
    }
    let scale = source.iter().map(|s| s.abs()).sum::<f64>() * dx;
    if scale == 0.0 {
        return Ok(vec![0.0; source.len()]);
    }
    if !scale.is_finite() {
        return Err(Error::Numerical("non-finite operator input".into()));
    }
    let unit: Vec<f64> = source.iter().map(|s| s / scale).collect();
    Ok(op.predict(&unit)?.into_iter().map(|v| v * scale).collect())
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn recast_iterate(
    op: &dyn SolutionOperator,
    dx: f64,
    sigma_t: &[f64],
    sigma_s0: &[f64],
    source: &[f64],
    reference: ReferenceParams,
    settings: &RecastSettings,
    initial: Option<&[f64]>,
) -> Result<RecastOutcome> {
    if op.reference_params() != reference {
        return Err(invalid(format!(
            "operator {} was built at {:?}, problem references {:?}",
            op.name(),
            op.reference_params(),
            reference
        )));
    }
    let mut calls = 0;
    let mut phi = match initial {
        Some(p) => p.to_vec(),
        None => {
            calls += 1;
            predict_scaled(op, source, dx)?
        }
    };
    let base = l2(&phi).max(f64::MIN_POSITIVE);
    let mut out = RecastOutcome {
        phi: Vec::new(),
        iterations: 0,
        operator_calls: 0,
        converged: false,
        diverged: false,
    };
    while out.iterations < settings.max_iterations {
        let modified = recast_source(source, &phi, sigma_t, sigma_s0, reference)?;
        let next = predict_scaled(op, &modified, dx)?;
        calls += 1;
        out.iterations += 1;
        let norm = l2(&next);
        if !norm.is_finite() || norm > DIVERGENCE_FACTOR * base {
            out.diverged = true;
            break;
        }
        let change = settings.convergence_norm.relative_change(&next, &phi);
        phi = next;
        if change < settings.tolerance {
            out.converged = true;
            break;
        }
    }
    out.phi = phi;
    out.operator_calls = calls;
    Ok(out)
}

/// Fixed point `φ ← operator(S′(φ))` for a single-group target, starting
/// from `initial_phi` or from `operator(S)`. Returns the last iterate in
/// every case; divergence is flagged rather than raised.
pub fn recast_fixed_point(
    problem: &RecastProblem,
    operator: &dyn SolutionOperator,
    grid: &Grid1D,
    initial_phi: Option<&[f64]>,
) -> Result<RecastOutcome> {
    problem.settings.validate()?;
    grid.check_len("recast problem", problem.target.n_cells())?;
    recast_iterate(
        operator,
        grid.dx(),
        problem.target.sigma_t(0),
        problem.target.sigma_s0(0, 0),
        problem.source.group(0),
        problem.reference,
        &problem.settings,
        initial_phi,
    )
}

/// Operator stage followed by model-based refinement on the full target.
#[derive(Debug, Clone)]
pub struct HybridSolution {
    pub flux: GroupFlux,
    pub precond: RecastOutcome,
    /// Source-iteration sweeps spent in refinement.
    pub refine_iterations: usize,
    pub converged: bool,
}

pub fn precondition_fixed_source(
    operator: &dyn SolutionOperator,
    problem: &RecastProblem,
    grid: &Grid1D,
    quadrature: &AngularQuadrature,
    config: &SolverConfig,
) -> Result<HybridSolution> {
    let precond = recast_fixed_point(problem, operator, grid, None)?;
    let initial = GroupFlux::from_phi(precond.phi.clone());
    let refined = source_iteration(
        grid,
        quadrature,
        problem.target.group(0),
        problem.source.group(0),
        config,
        Some(&initial),
    )?;
    Ok(HybridSolution {
        flux: refined.flux,
        precond,
        refine_iterations: refined.iterations,
        converged: refined.converged,
    })
}

/// Which operator serves which group: one shared operator or one per group.
#[derive(Clone, Copy)]
pub struct GroupOperators<'a> {
    ops: &'a [&'a dyn SolutionOperator],
}

impl<'a> GroupOperators<'a> {
    pub fn new(ops: &'a [&'a dyn SolutionOperator], n_groups: usize) -> Result<Self> {
        if ops.is_empty() || (ops.len() != 1 && ops.len() != n_groups) {
            return Err(invalid(format!(
                "need one operator or one per group ({n_groups}), got {}",
                ops.len()
            )));
        }
        Ok(Self { ops })
    }

    pub fn get(&self, g: usize) -> &'a dyn SolutionOperator {
        self.ops[if self.ops.len() == 1 { 0 } else { g }]
    }
}

/// SP inner solve: the recast fixed point alone. Inter-group scatter and
/// fission arrive as external source; each group's own `Σ_t` and
/// self-scatter deviate from the operator's `p*`.
pub struct RecastInner<'a> {
    pub ops: GroupOperators<'a>,
    pub grid: &'a Grid1D,
    pub materials: &'a MaterialField,
    pub settings: RecastSettings,
}

impl InnerSolver for RecastInner<'_> {
    fn solve(&self, group: usize, source: &[f64], initial: &GroupFlux) -> Result<InnerSolve> {
        let op = self.ops.get(group);
        let warm = initial.phi.iter().any(|&v| v != 0.0);
        let out = recast_iterate(
            op,
            self.grid.dx(),
            self.materials.sigma_t(group),
            self.materials.sigma_s0(group, group),
            source,
            op.reference_params(),
            &self.settings,
            warm.then_some(initial.phi.as_slice()),
        )?;
        if out.diverged {
            return Err(Error::Numerical(format!("recast diverged in group {group}")));
        }
        Ok(InnerSolve {
            flux: GroupFlux::from_phi(out.phi),
            sweeps: 0,
            operator_calls: out.operator_calls,
            converged: out.converged,
        })
    }
}

/// CP inner solve: recast prediction, then model-based source iteration
/// started from it.
pub struct ConstrainedInner<'a> {
    pub recast: RecastInner<'a>,
    pub model: ModelBasedInner<'a>,
}

impl InnerSolver for ConstrainedInner<'_> {
    fn solve(&self, group: usize, source: &[f64], initial: &GroupFlux) -> Result<InnerSolve> {
        let guess = self.recast.solve(group, source, initial)?;
        let mut start = guess.flux;
        start.current = initial.current.clone();
        let refined = self.model.solve(group, source, &start)?;
        Ok(InnerSolve {
            flux: refined.flux,
            sweeps: refined.sweeps,
            operator_calls: guess.operator_calls,
            converged: refined.converged,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenAlgorithm {
    Sp,
    Cp,
}

/// Per-stage iteration counts of a preconditioned eigen solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub algorithm: EigenAlgorithm,
    pub stage1_outer: usize,
    pub stage1_inner: usize,
    pub stage1_operator_calls: usize,
    pub stage1_k: Option<f64>,
    pub stage1_converged: bool,
    /// Stage 1 failed and stage 2 ran from a cold start.
    pub fallback: bool,
    pub stage2_outer: usize,
    pub stage2_inner: usize,
}

#[derive(Debug, Clone)]
pub struct PreconditionedEigen {
    pub solution: EigenSolution,
    pub diagnostics: StageDiagnostics,
}

#[allow(clippy::too_many_arguments)]
fn preconditioned_eigen(
    algorithm: EigenAlgorithm,
    ops: &[&dyn SolutionOperator],
    grid: &Grid1D,
    quadrature: &AngularQuadrature,
    materials: &MaterialField,
    config: &SolverConfig,
    settings: &RecastSettings,
) -> Result<PreconditionedEigen> {
    settings.validate()?;
    let ops = GroupOperators::new(ops, materials.n_groups())?;
    for g in 0..materials.n_groups() {
        if ops.get(g).n_cells() != grid.n_cells() {
            return Err(invalid("operator resolution differs from the grid"));
        }
    }
    let model = ModelBasedInner {
        grid,
        quadrature,
        materials,
        config,
    };
    let recast = RecastInner {
        ops,
        grid,
        materials,
        settings: *settings,
    };
    let mut stage1_config = config.clone();
    stage1_config.max_outer_iterations = settings.stage1_max_outer;
    let stage1 = match algorithm {
        EigenAlgorithm::Sp => power_iteration(grid, materials, &stage1_config, &recast, None),
        EigenAlgorithm::Cp => {
            let inner = ConstrainedInner {
                recast,
                model: model.clone(),
            };
            power_iteration(grid, materials, &stage1_config, &inner, None)
        }
    };
    let stage1 = match stage1 {
        Ok(s) => Some(s),
        Err(Error::Numerical(msg)) => {
            log::warn!("stage 1 abandoned: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let initial = stage1.as_ref().map(|s| (s.k, &s.flux));
    let stage2 = power_iteration(grid, materials, config, &model, initial)?;
    let diagnostics = StageDiagnostics {
        algorithm,
        stage1_outer: stage1.as_ref().map_or(0, |s| s.outer_iterations),
        stage1_inner: stage1.as_ref().map_or(0, |s| s.total_inner_iterations),
        stage1_operator_calls: stage1.as_ref().map_or(0, |s| s.operator_calls),
        stage1_k: stage1.as_ref().map(|s| s.k),
        stage1_converged: stage1.as_ref().is_some_and(|s| s.converged),
        fallback: stage1.is_none(),
        stage2_outer: stage2.outer_iterations,
        stage2_inner: stage2.total_inner_iterations,
    };
    Ok(PreconditionedEigen {
        solution: stage2,
        diagnostics,
    })
}

/// Simple preconditioning: operator-only power iteration, then model-based
/// power iteration from its `(k, φ)`.
pub fn sp_eigen(
    ops: &[&dyn SolutionOperator],
    grid: &Grid1D,
    quadrature: &AngularQuadrature,
    materials: &MaterialField,
    config: &SolverConfig,
    settings: &RecastSettings,
) -> Result<PreconditionedEigen> {
    preconditioned_eigen(EigenAlgorithm::Sp, ops, grid, quadrature, materials, config, settings)
}

/// Constrained preconditioning: every stage-1 inner solve is an operator
/// prediction refined by source iteration.
pub fn cp_eigen(
    ops: &[&dyn SolutionOperator],
    grid: &Grid1D,
    quadrature: &AngularQuadrature,
    materials: &MaterialField,
    config: &SolverConfig,
    settings: &RecastSettings,
) -> Result<PreconditionedEigen> {
    preconditioned_eigen(EigenAlgorithm::Cp, ops, grid, quadrature, materials, config, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: ReferenceParams = ReferenceParams {
        sigma_t: 1.0,
        sigma_s0: 0.5,
    };

    #[test]
    fn recast_source_arithmetic() {
        let s = [0.3, 0.0, -1.0];
        assert_eq!(recast_source(&s, &[2.0; 3], &[1.0; 3], &[0.5; 3], P).unwrap(), s);
        assert_eq!(recast_source(&s, &[0.0; 3], &[1.2; 3], &[0.8; 3], P).unwrap(), s);
        let out = recast_source(&[0.0; 3], &[1.0; 3], &[1.2; 3], &[0.8; 3], P).unwrap();
        assert!(out.iter().all(|v| (v - 0.1).abs() < 1e-15));
        assert!(recast_source(&[0.0; 3], &[1.0; 2], &[1.2; 3], &[0.8; 3], P).is_err());
    }

    struct Scale(f64, usize);

    impl SolutionOperator for Scale {
        fn reference_params(&self) -> ReferenceParams {
            P
        }
        fn n_cells(&self) -> usize {
            self.1
        }
        fn predict(&self, source: &[f64]) -> Result<Vec<f64>> {
            Ok(source.iter().map(|s| s * self.0).collect())
        }
        fn name(&self) -> &str {
            "scale"
        }
    }

    #[test]
    fn divergence_is_flagged_not_raised() {
        let grid = Grid1D::new(1.0, 4).unwrap();
        // δ = 3.0 makes φ ← 2(S + 3φ) grow sixfold per step.
        let m = MaterialField::homogeneous(4, 1.0, 3.5, 0.0, 0.0).unwrap();
        let src = SourceField::single_group(vec![1.0; 4]).unwrap();
        let problem = RecastProblem::new(m, P, src).unwrap();
        let out = recast_fixed_point(&problem, &Scale(2.0, 4), &grid, None).unwrap();
        assert!(out.diverged && !out.converged);
        assert!(out.iterations < 50);
        assert!(out.phi.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_deviation_converges_immediately() {
        let grid = Grid1D::new(1.0, 4).unwrap();
        let m = MaterialField::homogeneous(4, 1.0, 0.5, 0.0, 0.0).unwrap();
        let src = SourceField::single_group(vec![0.25, 0.5, 0.75, 1.0]).unwrap();
        let problem = RecastProblem::new(m, P, src).unwrap();
        let out = recast_fixed_point(&problem, &Scale(0.7, 4), &grid, None).unwrap();
        assert!(out.converged && out.iterations <= 2);
        assert_eq!(out.phi, vec![0.175, 0.35, 0.525, 0.7]);
    }

    #[test]
    fn mismatched_reference_is_rejected() {
        let grid = Grid1D::new(1.0, 4).unwrap();
        let m = MaterialField::homogeneous(4, 1.0, 0.5, 0.0, 0.0).unwrap();
        let src = SourceField::single_group(vec![1.0; 4]).unwrap();
        let other = ReferenceParams {
            sigma_t: 2.0,
            sigma_s0: 0.5,
        };
        let problem = RecastProblem::new(m, other, src).unwrap();
        assert!(recast_fixed_point(&problem, &Scale(1.0, 4), &grid, None).is_err());
    }

    #[test]
    fn operator_count_must_match_groups() {
        let a = Scale(1.0, 4);
        let ops: [&dyn SolutionOperator; 2] = [&a, &a];
        assert!(GroupOperators::new(&ops, 3).is_err());
        assert!(GroupOperators::new(&ops, 2).is_ok());
        assert!(GroupOperators::new(&ops[..1], 3).is_ok());
    }
}
