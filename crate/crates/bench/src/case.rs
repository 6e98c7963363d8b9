//! Case files and the algorithms that run them.
//!
//! ```json
//! {
//!   "id": "fixed-case2",
//!   "kind": "fixed_source",
//!   "algorithm": "hybrid_pre",
//!   "operator": "fno.snopm",
//!   "problem": { "grid": {...}, "quadrature": {...}, "materials": {...}, "source": {...} }
//! }
//! ```
//!
//! `operator` is either a model file path or `{"exact": {...}}` for the
//! model-based solver at the reference parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use slabnop::domain::problem::{Problem, ProblemConfig};
use slabnop::eigen::{power_iteration, ModelBasedInner};
use slabnop::neural::load_model;
use slabnop::operator::ExactOperator;
use slabnop::precond::{
    cp_eigen, precondition_fixed_source, recast_fixed_point, sp_eigen, GroupOperators,
    PreconditionedEigen, RecastInner, RecastProblem, RecastSettings,
};
use slabnop::transport::source_iteration;
use slabnop::{FluxField, ReferenceParams, SolutionOperator};

use crate::error::{config_err, Result};
use crate::paths::{read_json, Paths};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    FixedSource,
    #[serde(rename = "eigen_1g")]
    Eigen1g,
    #[serde(rename = "eigen_3g")]
    Eigen3g,
}

impl ProblemKind {
    pub fn is_eigen(self) -> bool {
        !matches!(self, ProblemKind::FixedSource)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ModelBased,
    #[serde(rename = "standalone_no", alias = "standalone_NO")]
    StandaloneNo,
    HybridPre,
    Sp,
    Cp,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ModelBased => "model_based",
            Algorithm::StandaloneNo => "standalone_no",
            Algorithm::HybridPre => "hybrid_pre",
            Algorithm::Sp => "sp",
            Algorithm::Cp => "cp",
        }
    }

    pub fn needs_operator(self) -> bool {
        self != Algorithm::ModelBased
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactOperatorSpec {
    #[serde(default)]
    pub reference: ReferenceParams,
    #[serde(default = "default_exact_tolerance")]
    pub tolerance: f64,
}

fn default_exact_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSource {
    Exact { exact: ExactOperatorSpec },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub kind: ProblemKind,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSource>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub recast: RecastSettings,
    /// Also run the model-based cold start and report distances to it.
    #[serde(default = "default_true")]
    pub compare_cold_start: bool,
}

fn default_true() -> bool {
    true
}

impl CaseSpec {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Evaluates the problem and checks it against the declared kind and
    /// algorithm.
    pub fn resolve(&self) -> Result<Problem> {
        let problem = self.problem.resolve()?;
        let groups = problem.materials.n_groups();
        let fail = |msg: String| Err(config_err(format!("case {}: {msg}", self.id)));
        match self.kind {
            ProblemKind::FixedSource => {
                if groups != 1 {
                    return fail(format!("fixed_source cases are single-group, got {groups} groups"));
                }
                if problem.source.is_none() {
                    return fail("fixed_source case needs a source".into());
                }
            }
            ProblemKind::Eigen1g if groups != 1 => {
                return fail(format!("eigen_1g case has {groups} groups"));
            }
            ProblemKind::Eigen3g if groups != 3 => {
                return fail(format!("eigen_3g case has {groups} groups"));
            }
            _ => {}
        }
        let ok = match self.algorithm {
            Algorithm::ModelBased | Algorithm::StandaloneNo => true,
            Algorithm::HybridPre => !self.kind.is_eigen(),
            Algorithm::Sp | Algorithm::Cp => self.kind.is_eigen(),
        };
        if !ok {
            return fail(format!("algorithm {} does not apply to this kind", self.algorithm));
        }
        if self.algorithm.needs_operator() && self.operator.is_none() {
            return fail(format!("algorithm {} needs an operator", self.algorithm));
        }
        Ok(problem)
    }
}

/// Builds the operator and checks it was made for this case's grid.
pub fn load_operator(source: &OperatorSource, problem: &Problem, paths: &Paths) -> Result<Box<dyn SolutionOperator>> {
    match source {
        OperatorSource::Exact { exact } => {
            let mut cfg = problem.solver.clone().with_tolerance(exact.tolerance);
            cfg.max_inner_iterations = cfg.max_inner_iterations.max(100_000);
            Ok(Box::new(ExactOperator::new(
                problem.grid.clone(),
                problem.quadrature.clone(),
                exact.reference,
                cfg,
            )?))
        }
        OperatorSource::File(p) => {
            let path = paths.input(p);
            let loaded = load_model(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let grid = loaded.model.grid();
            if grid.n_cells() != problem.grid.n_cells() || grid.length() != problem.grid.length() {
                return Err(config_err(format!(
                    "{}: operator grid ({} cm, {} cells) differs from case grid ({} cm, {} cells)",
                    path.display(),
                    grid.length(),
                    grid.n_cells(),
                    problem.grid.length(),
                    problem.grid.n_cells()
                )));
            }
            Ok(Box::new(loaded.model))
        }
    }
}

/// Counts from the operator stage of a preconditioned run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOne {
    /// Recast iterations (fixed source) or outer iterations (eigen).
    pub iterations: usize,
    /// Transport sweeps spent inside stage 1 (CP only).
    pub sweeps: usize,
    pub operator_calls: usize,
    pub k: Option<f64>,
    pub converged: bool,
    pub diverged: bool,
    /// Stage 1 was abandoned and the final stage started cold.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algorithm: Algorithm,
    pub flux: FluxField,
    pub converged: bool,
    pub k: Option<f64>,
    /// Outer iterations of the final model-based stage (0 for fixed source).
    pub outer_iterations: usize,
    /// Transport sweeps of the final model-based stage.
    pub inner_iterations: usize,
    pub stage1: Option<StageOne>,
    pub wall_time_s: f64,
}

/// Runs `algorithm` on a resolved problem.
pub fn execute(
    algorithm: Algorithm,
    problem: &Problem,
    recast: &RecastSettings,
    operator: Option<&dyn SolutionOperator>,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let grid = &problem.grid;
    let quad = &problem.quadrature;
    let m = &problem.materials;
    let cfg = &problem.solver;
    let need_op = || operator.ok_or_else(|| config_err(format!("algorithm {algorithm} needs an operator")));
    let mut out = match (algorithm, &problem.source) {
        (Algorithm::ModelBased, Some(src)) => {
            let sol = source_iteration(grid, quad, m.group(0), src.group(0), cfg, None)?;
            RunOutcome {
                algorithm,
                flux: FluxField::from_groups(vec![sol.flux], false),
                converged: sol.converged,
                k: None,
                outer_iterations: 0,
                inner_iterations: sol.iterations,
                stage1: None,
                wall_time_s: 0.0,
            }
        }
        (Algorithm::ModelBased, None) => {
            let inner = ModelBasedInner {
                grid,
                quadrature: quad,
                materials: m,
                config: cfg,
            };
            let sol = power_iteration(grid, m, cfg, &inner, None)?;
            RunOutcome {
                algorithm,
                flux: sol.flux,
                converged: sol.converged,
                k: Some(sol.k),
                outer_iterations: sol.outer_iterations,
                inner_iterations: sol.total_inner_iterations,
                stage1: None,
                wall_time_s: 0.0,
            }
        }
        (Algorithm::StandaloneNo, Some(src)) => {
            let op = need_op()?;
            let rp = RecastProblem::new(m.clone(), op.reference_params(), src.clone())?.with_settings(*recast);
            let r = recast_fixed_point(&rp, op, grid, None)?;
            let stage = StageOne {
                iterations: r.iterations,
                sweeps: 0,
                operator_calls: r.operator_calls,
                k: None,
                converged: r.converged,
                diverged: r.diverged,
                fallback: false,
            };
            RunOutcome {
                algorithm,
                flux: FluxField::from_groups(vec![slabnop::GroupFlux::from_phi(r.phi)], false),
                converged: r.converged && !r.diverged,
                k: None,
                outer_iterations: 0,
                inner_iterations: 0,
                stage1: Some(stage),
                wall_time_s: 0.0,
            }
        }
        (Algorithm::StandaloneNo, None) => {
            let op = need_op()?;
            let ops = [op];
            let inner = RecastInner {
                ops: GroupOperators::new(&ops, m.n_groups())?,
                grid,
                materials: m,
                settings: *recast,
            };
            let mut stage_cfg = cfg.clone();
            stage_cfg.max_outer_iterations = recast.stage1_max_outer;
            let sol = power_iteration(grid, m, &stage_cfg, &inner, None)?;
            let stage = StageOne {
                iterations: sol.outer_iterations,
                sweeps: 0,
                operator_calls: sol.operator_calls,
                k: Some(sol.k),
                converged: sol.converged,
                diverged: false,
                fallback: false,
            };
            RunOutcome {
                algorithm,
                flux: sol.flux,
                converged: sol.converged,
                k: Some(sol.k),
                outer_iterations: 0,
                inner_iterations: 0,
                stage1: Some(stage),
                wall_time_s: 0.0,
            }
        }
        (Algorithm::HybridPre, Some(src)) => {
            let op = need_op()?;
            let rp = RecastProblem::new(m.clone(), op.reference_params(), src.clone())?.with_settings(*recast);
            let h = precondition_fixed_source(op, &rp, grid, quad, cfg)?;
            let stage = StageOne {
                iterations: h.precond.iterations,
                sweeps: 0,
                operator_calls: h.precond.operator_calls,
                k: None,
                converged: h.precond.converged,
                diverged: h.precond.diverged,
                fallback: false,
            };
            RunOutcome {
                algorithm,
                flux: FluxField::from_groups(vec![h.flux], false),
                converged: h.converged,
                k: None,
                outer_iterations: 0,
                inner_iterations: h.refine_iterations,
                stage1: Some(stage),
                wall_time_s: 0.0,
            }
        }
        (Algorithm::Sp | Algorithm::Cp, None) => {
            let op = need_op()?;
            let ops = [op];
            let r = if algorithm == Algorithm::Sp {
                sp_eigen(&ops, grid, quad, m, cfg, recast)?
            } else {
                cp_eigen(&ops, grid, quad, m, cfg, recast)?
            };
            preconditioned_outcome(algorithm, r)
        }
        _ => {
            return Err(config_err(format!(
                "algorithm {algorithm} does not apply to a {} problem",
                if problem.source.is_some() { "fixed-source" } else { "eigenvalue" }
            )))
        }
    };
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn preconditioned_outcome(algorithm: Algorithm, r: PreconditionedEigen) -> RunOutcome {
    let d = r.diagnostics;
    RunOutcome {
        algorithm,
        converged: r.solution.converged,
        k: Some(r.solution.k),
        outer_iterations: d.stage2_outer,
        inner_iterations: d.stage2_inner,
        flux: r.solution.flux,
        stage1: Some(StageOne {
            iterations: d.stage1_outer,
            sweeps: d.stage1_inner,
            operator_calls: d.stage1_operator_calls,
            k: d.stage1_k,
            converged: d.stage1_converged,
            diverged: d.fallback,
            fallback: d.fallback,
        }),
        wall_time_s: 0.0,
    }
}

/// Relative L2 distance after scaling both fields to unit L2 norm, over all
/// groups at once.
pub fn normalized_l2(a: &FluxField, b: &FluxField) -> f64 {
    let fa: Vec<f64> = a.phi.iter().flatten().copied().collect();
    let fb: Vec<f64> = b.phi.iter().flatten().copied().collect();
    let na = fa.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = fb.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || fa.len() != fb.len() {
        return f64::NAN;
    }
    fa.iter()
        .zip(&fb)
        .map(|(x, y)| (x / na - y / nb).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Report record of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub kind: ProblemKind,
    pub algorithm: Algorithm,
    pub converged: bool,
    pub k: Option<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub stage1: Option<StageOne>,
    pub cold_start_outer: Option<usize>,
    pub cold_start_inner: Option<usize>,
    pub cold_start_k: Option<f64>,
    /// Normalized L2 distance to the cold-start flux.
    pub l2_vs_cold_start: Option<f64>,
    pub wall_time_s: f64,
    pub cold_start_wall_time_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: CaseReport,
    pub outcome: RunOutcome,
    pub problem: Problem,
}

/// Loads, runs and (optionally) compares one case against its cold start.
pub fn run_case(spec: &CaseSpec, paths: &Paths) -> Result<CaseRun> {
    let problem = spec.resolve()?;
    let operator = match (&spec.operator, spec.algorithm.needs_operator()) {
        (Some(src), true) => Some(load_operator(src, &problem, paths)?),
        _ => None,
    };
    let outcome = execute(spec.algorithm, &problem, &spec.recast, operator.as_deref())?;
    let cold = if spec.compare_cold_start && spec.algorithm != Algorithm::ModelBased {
        Some(execute(Algorithm::ModelBased, &problem, &spec.recast, None)?)
    } else {
        None
    };
    let report = make_report(spec, &outcome, cold.as_ref());
    Ok(CaseRun {
        report,
        outcome,
        problem,
    })
}

pub fn make_report(spec: &CaseSpec, outcome: &RunOutcome, cold: Option<&RunOutcome>) -> CaseReport {
    CaseReport {
        case_id: spec.id.clone(),
        kind: spec.kind,
        algorithm: outcome.algorithm,
        converged: outcome.converged,
        k: outcome.k,
        outer_iterations: outcome.outer_iterations,
        inner_iterations: outcome.inner_iterations,
        stage1: outcome.stage1.clone(),
        cold_start_outer: cold.map(|c| c.outer_iterations),
        cold_start_inner: cold.map(|c| c.inner_iterations),
        cold_start_k: cold.and_then(|c| c.k),
        l2_vs_cold_start: cold.map(|c| normalized_l2(&outcome.flux, &c.flux)),
        wall_time_s: outcome.wall_time_s,
        cold_start_wall_time_s: cold.map(|c| c.wall_time_s),
    }
}
