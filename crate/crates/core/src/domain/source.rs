use serde::{Deserialize, Serialize};

use super::Grid1D;
use crate::error::{invalid, Result};

/// Isotropic external source density per group, `q[g][cell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceField {
    q: Vec<Vec<f64>>,
    normalized: bool,
}

impl SourceField {
    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        if q.is_empty() || q[0].is_empty() || q.iter().any(|r| r.len() != q[0].len()) {
            return Err(invalid("source must be a non-empty rectangular G x n array"));
        }
        if q.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("source contains non-finite values"));
        }
        Ok(Self {
            q,
            normalized: false,
        })
    }

    pub fn single_group(q: Vec<f64>) -> Result<Self> {
        Self::new(vec![q])
    }

    /// Scales the source so that `Σ_g ∫ q_g dx = 1`.
    pub fn normalized(mut self, grid: &Grid1D) -> Result<Self> {
        let total = self.total(grid)?;
        if !(total.is_finite() && total > 0.0) {
            return Err(invalid(format!("cannot normalize source with integral {total}")));
        }
        for v in self.q.iter_mut().flatten() {
            *v /= total;
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn n_groups(&self) -> usize {
        self.q.len()
    }

    pub fn group(&self, g: usize) -> &[f64] {
        &self.q[g]
    }

    /// `Σ_g Σ_i q[g][i] Δx`.
    pub fn total(&self, grid: &Grid1D) -> Result<f64> {
        let mut total = 0.0;
        for row in &self.q {
            total += super::integrate_cellwise(row, grid)?;
        }
        Ok(total)
    }
}
