//! JSON problem description: grid, quadrature, materials, source, solver.
//!
//! Every material quantity is given per group as a [`FieldSpec`]: a scalar,
//! an explicit per-cell array, or a named spatial profile.
//!
//! ```json
//! {
//!   "grid": {"length_cm": 10.0, "n_cells": 100},
//!   "quadrature": {"order": 32},
//!   "materials": {
//!     "sigma_t": [1.0],
//!     "sigma_s0": [[{"profile": "sinusoid", "base": 0.5, "amplitude": 0.1, "period_cm": 5.0}]]
//!   },
//!   "source": {"grf": {"seed": 7}},
//!   "solver": {"tolerance": 1e-4}
//! }
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AngularQuadrature, Grid1D, MaterialField, SolverConfig, SourceField};
use crate::error::{Error, Result};
use crate::grf::{self, GrfSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Scalar(f64),
    Array(Vec<f64>),
    Profile(Profile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `base + amplitude · sin(2π (x − phase_cm) / period_cm)`.
    Sinusoid {
        base: f64,
        amplitude: f64,
        period_cm: f64,
        #[serde(default)]
        phase_cm: f64,
    },
    /// Piecewise constant; a cell takes the value of the first segment whose
    /// `end_cm` lies beyond its center.
    Step { segments: Vec<StepSegment> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSegment {
    pub end_cm: f64,
    pub value: f64,
}

impl FieldSpec {
    pub fn resolve(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        match self {
            FieldSpec::Scalar(v) => Ok(vec![*v; grid.n_cells()]),
            FieldSpec::Array(values) => {
                grid.check_len("per-cell array", values.len())?;
                Ok(values.clone())
            }
            FieldSpec::Profile(Profile::Sinusoid {
                base,
                amplitude,
                period_cm,
                phase_cm,
            }) => {
                if !(*period_cm > 0.0) {
                    return Err(Error::Config("sinusoid period must be positive".into()));
                }
                Ok(grid
                    .centers()
                    .iter()
                    .map(|x| base + amplitude * (2.0 * PI * (x - phase_cm) / period_cm).sin())
                    .collect())
            }
            FieldSpec::Profile(Profile::Step { segments }) => {
                if segments.is_empty() {
                    return Err(Error::Config("step profile needs at least one segment".into()));
                }
                Ok(grid
                    .centers()
                    .iter()
                    .map(|&x| {
                        segments
                            .iter()
                            .find(|s| x < s.end_cm)
                            .unwrap_or(segments.last().unwrap())
                            .value
                    })
                    .collect())
            }
        }
    }
}

/// Per-group material description. Omitted `sigma_s1`/`nu_sigma_f` are zero;
/// omitted `chi` puts every fission neutron into the first group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub sigma_t: Vec<FieldSpec>,
    /// `sigma_s0[from][to]`.
    pub sigma_s0: Vec<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_s1: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_sigma_f: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<Vec<f64>>,
}

impl MaterialSpec {
    pub fn resolve(&self, grid: &Grid1D) -> Result<MaterialField> {
        let g = self.sigma_t.len();
        let per_group = |specs: &Option<Vec<FieldSpec>>, what: &str| -> Result<Vec<Vec<f64>>> {
            match specs {
                None => Ok(vec![vec![0.0; grid.n_cells()]; g]),
                Some(v) if v.len() != g => {
                    Err(Error::Config(format!("{what} has {} groups, expected {g}", v.len())))
                }
                Some(v) => v.iter().map(|s| s.resolve(grid)).collect(),
            }
        };
        let sigma_t = per_group(&Some(self.sigma_t.clone()), "sigma_t")?;
        if self.sigma_s0.len() != g {
            return Err(Error::Config(format!("sigma_s0 must have {g} rows")));
        }
        let sigma_s0 = self
            .sigma_s0
            .iter()
            .map(|row| per_group(&Some(row.clone()), "sigma_s0 row"))
            .collect::<Result<Vec<_>>>()?;
        let sigma_s1 = per_group(&self.sigma_s1, "sigma_s1")?;
        let nu_sigma_f = per_group(&self.nu_sigma_f, "nu_sigma_f")?;
        let chi = match &self.chi {
            Some(c) => c.clone(),
            None => (0..g).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
        };
        MaterialField::new(sigma_t, sigma_s0, sigma_s1, nu_sigma_f, chi)
    }

    /// Explicit per-cell description of an existing material.
    pub fn from_field(field: &MaterialField) -> Self {
        let g = field.n_groups();
        let arr = |v: &[f64]| FieldSpec::Array(v.to_vec());
        Self {
            sigma_t: (0..g).map(|i| arr(field.sigma_t(i))).collect(),
            sigma_s0: (0..g)
                .map(|from| (0..g).map(|to| arr(field.sigma_s0(from, to))).collect())
                .collect(),
            sigma_s1: Some((0..g).map(|i| arr(field.sigma_s1(i))).collect()),
            nu_sigma_f: Some((0..g).map(|i| arr(field.nu_sigma_f(i))).collect()),
            chi: Some(field.chi().to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Sampled into group 0.
    Grf(GrfSpec),
    /// `q[g][cell]`.
    Array(Vec<Vec<f64>>),
    /// Same value in every group and cell.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

impl SourceSpec {
    pub fn resolve(&self, grid: &Grid1D, n_groups: usize) -> Result<SourceField> {
        let source = match &self.kind {
            SourceKind::Grf(spec) => {
                let raw = grf::sample_grf(spec, grid)?;
                let mut q = vec![vec![0.0; grid.n_cells()]; n_groups];
                q[0] = raw;
                SourceField::new(q)?
            }
            SourceKind::Array(q) => {
                if q.len() != n_groups {
                    return Err(Error::Config(format!(
                        "source array has {} groups, expected {n_groups}",
                        q.len()
                    )));
                }
                for row in q {
                    grid.check_len("source row", row.len())?;
                }
                SourceField::new(q.clone())?
            }
            SourceKind::Constant(v) => SourceField::new(vec![vec![*v; grid.n_cells()]; n_groups])?,
        };
        if self.normalize {
            source.normalized(grid)
        } else {
            Ok(source)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub grid: Grid1D,
    pub quadrature: AngularQuadrature,
    pub materials: MaterialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// A [`ProblemConfig`] with every field evaluated on the grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid1D,
    pub quadrature: AngularQuadrature,
    pub materials: MaterialField,
    pub source: Option<SourceField>,
    pub solver: SolverConfig,
}

impl ProblemConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Problem> {
        self.solver.validate()?;
        let materials = self.materials.resolve(&self.grid)?;
        let source = self
            .source
            .as_ref()
            .map(|s| s.resolve(&self.grid, materials.n_groups()))
            .transpose()?;
        Ok(Problem {
            grid: self.grid.clone(),
            quadrature: self.quadrature.clone(),
            materials,
            source,
            solver: self.solver.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "grid": {"length_cm": 10.0, "n_cells": 100},
        "quadrature": {"order": 32},
        "materials": {
            "sigma_t": [1.0],
            "sigma_s0": [[{"profile": "sinusoid", "base": 0.5, "amplitude": 0.1, "period_cm": 5.0}]],
            "sigma_s1": [{"profile": "step", "segments": [{"end_cm": 5.0, "value": 0.0}, {"end_cm": 10.0, "value": 0.3}]}]
        },
        "source": {"grf": {"seed": 7}},
        "solver": {"tolerance": 1e-6}
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ProblemConfig::from_json_str(EXAMPLE).unwrap();
        let p = cfg.resolve().unwrap();
        assert_eq!(p.grid.n_cells(), 100);
        assert_eq!(p.quadrature.order(), 32);
        assert_eq!(p.solver.tolerance, 1e-6);
        let s0 = p.materials.sigma_s0(0, 0);
        assert!(s0.iter().all(|&v| (0.4..=0.6).contains(&v)));
        let s1 = p.materials.sigma_s1(0);
        assert_eq!(s1[0], 0.0);
        assert_eq!(s1[99], 0.3);
        let src = p.source.unwrap();
        assert!((src.total(&p.grid).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_errors_carry_position() {
        let err = ProblemConfig::from_json_str("{\n\"grid\": {\"length_cm\": 10.0}\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
        let bad_order = EXAMPLE.replace("\"order\": 32", "\"order\": 3");
        assert!(ProblemConfig::from_json_str(&bad_order).is_err());
    }

    #[test]
    fn material_round_trip_is_bit_identical() {
        let cfg = ProblemConfig::from_json_str(EXAMPLE).unwrap();
        let field = cfg.materials.resolve(&cfg.grid).unwrap();
        let text = serde_json::to_string(&MaterialSpec::from_field(&field)).unwrap();
        let back: MaterialSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.resolve(&cfg.grid).unwrap(), field);
    }

    #[test]
    fn group_count_mismatch() {
        let text = EXAMPLE.replace("\"sigma_t\": [1.0]", "\"sigma_t\": [1.0, 2.0]");
        let cfg = ProblemConfig::from_json_str(&text).unwrap();
        assert!(cfg.resolve().is_err());
    }
}
