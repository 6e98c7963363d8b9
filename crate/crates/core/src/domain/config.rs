use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// No incoming angular flux.
    #[default]
    Vacuum,
    /// Incoming flux equals the outgoing flux of the mirrored direction.
    Reflective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ConvergenceNorm {
    #[default]
    #[serde(rename = "relative_Linf")]
    RelativeLinf,
    #[serde(rename = "relative_L2")]
    RelativeL2,
}

impl ConvergenceNorm {
    /// Size of `new - old` relative to `new`. Two all-zero iterates are a
    /// zero change.
    pub fn relative_change(self, new: &[f64], old: &[f64]) -> f64 {
        let (num, den) = match self {
            ConvergenceNorm::RelativeLinf => {
                let num = new.iter().zip(old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let den = new.iter().map(|a| a.abs()).fold(0.0, f64::max);
                (num, den)
            }
            ConvergenceNorm::RelativeL2 => {
                let num: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
                let den: f64 = new.iter().map(|a| a * a).sum();
                (num.sqrt(), den.sqrt())
            }
        };
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_inner_iterations: usize,
    pub max_outer_iterations: usize,
    pub boundary_left: Boundary,
    pub boundary_right: Boundary,
    pub convergence_norm: ConvergenceNorm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_inner_iterations: 10_000,
            max_outer_iterations: 5_000,
            boundary_left: Boundary::Vacuum,
            boundary_right: Boundary::Vacuum,
            convergence_norm: ConvergenceNorm::RelativeLinf,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_boundaries(mut self, bc: Boundary) -> Self {
        self.boundary_left = bc;
        self.boundary_right = bc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(invalid(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        if self.max_inner_iterations == 0 || self.max_outer_iterations == 0 {
            return Err(invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SolverConfig::default();
        assert_eq!(c.tolerance, 1e-4);
        assert_eq!(c.boundary_left, Boundary::Vacuum);
        c.validate().unwrap();
        assert!(c.clone().with_tolerance(1.0).validate().is_err());
        assert!(c.with_tolerance(0.0).validate().is_err());
    }

    #[test]
    fn partial_json() {
        let c: SolverConfig =
            serde_json::from_str(r#"{"tolerance": 1e-6, "boundary_left": "reflective", "convergence_norm": "relative_L2"}"#)
                .unwrap();
        assert_eq!(c.tolerance, 1e-6);
        assert_eq!(c.boundary_left, Boundary::Reflective);
        assert_eq!(c.boundary_right, Boundary::Vacuum);
        assert_eq!(c.convergence_norm, ConvergenceNorm::RelativeL2);
    }

    #[test]
    fn relative_change_edge_cases() {
        let n = ConvergenceNorm::RelativeLinf;
        assert_eq!(n.relative_change(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(n.relative_change(&[0.0], &[1.0]), f64::INFINITY);
        assert!((n.relative_change(&[2.0, 1.0], &[1.0, 1.0]) - 0.5).abs() < 1e-15);
        let l2 = ConvergenceNorm::RelativeL2;
        assert!((l2.relative_change(&[3.0, 4.0], &[3.0, 3.0]) - 0.2).abs() < 1e-15);
    }
}
