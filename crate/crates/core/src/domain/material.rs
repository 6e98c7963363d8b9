use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-cell, per-group macroscopic cross sections (cm⁻¹).
///
/// `sigma_s0[from][to][cell]` is the zeroth Legendre moment of group-to-group
/// scattering; `sigma_s1[g][cell]` is the within-group first moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialField {
    sigma_t: Vec<Vec<f64>>,
    sigma_s0: Vec<Vec<Vec<f64>>>,
    sigma_s1: Vec<Vec<f64>>,
    nu_sigma_f: Vec<Vec<f64>>,
    chi: Vec<f64>,
}

/// Borrowed within-group slice of a [`MaterialField`].
#[derive(Debug, Clone, Copy)]
pub struct GroupMaterial<'a> {
    pub sigma_t: &'a [f64],
    /// Within-group (self) scattering, `Σ_s0^{g→g}`.
    pub sigma_s0: &'a [f64],
    pub sigma_s1: &'a [f64],
}

impl MaterialField {
    pub fn new(
        sigma_t: Vec<Vec<f64>>,
        sigma_s0: Vec<Vec<Vec<f64>>>,
        sigma_s1: Vec<Vec<f64>>,
        nu_sigma_f: Vec<Vec<f64>>,
        chi: Vec<f64>,
    ) -> Result<Self> {
        let g = sigma_t.len();
        if g == 0 {
            return Err(invalid("material needs at least one group"));
        }
        let n = sigma_t[0].len();
        if n == 0 {
            return Err(invalid("material needs at least one cell"));
        }
        let rows_ok = |rows: &[Vec<f64>]| rows.len() == g && rows.iter().all(|r| r.len() == n);
        if !rows_ok(&sigma_t) || !rows_ok(&sigma_s1) || !rows_ok(&nu_sigma_f) {
            return Err(invalid(format!("cross-section arrays must be {g} x {n}")));
        }
        if sigma_s0.len() != g || !sigma_s0.iter().all(|row| rows_ok(row)) {
            return Err(invalid(format!("scattering matrix must be {g} x {g} x {n}")));
        }
        if chi.len() != g {
            return Err(invalid(format!("fission spectrum must have {g} entries")));
        }
        let all = sigma_t
            .iter()
            .chain(sigma_s1.iter())
            .chain(nu_sigma_f.iter())
            .chain(sigma_s0.iter().flatten())
            .flatten()
            .chain(chi.iter());
        for &v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("cross sections must be finite and >= 0, got {v}")));
            }
        }
        let field = Self {
            sigma_t,
            sigma_s0,
            sigma_s1,
            nu_sigma_f,
            chi,
        };
        if field.has_fission() {
            let total: f64 = field.chi.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("fission spectrum sums to {total}, expected 1")));
            }
        }
        field.warn_unphysical();
        Ok(field)
    }

    /// Single-group material that is constant in space.
    pub fn homogeneous(
        n_cells: usize,
        sigma_t: f64,
        sigma_s0: f64,
        sigma_s1: f64,
        nu_sigma_f: f64,
    ) -> Result<Self> {
        Self::single_group(
            vec![sigma_t; n_cells],
            vec![sigma_s0; n_cells],
            vec![sigma_s1; n_cells],
            vec![nu_sigma_f; n_cells],
        )
    }

    pub fn single_group(
        sigma_t: Vec<f64>,
        sigma_s0: Vec<f64>,
        sigma_s1: Vec<f64>,
        nu_sigma_f: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            vec![sigma_t],
            vec![vec![sigma_s0]],
            vec![sigma_s1],
            vec![nu_sigma_f],
            vec![1.0],
        )
    }

    /// Spatially constant multigroup material. `scatter[from][to]`.
    pub fn homogeneous_multigroup(
        n_cells: usize,
        sigma_t: &[f64],
        scatter: &[Vec<f64>],
        nu_sigma_f: &[f64],
        chi: &[f64],
    ) -> Result<Self> {
        let spread = |v: f64| vec![v; n_cells];
        Self::new(
            sigma_t.iter().map(|&v| spread(v)).collect(),
            scatter
                .iter()
                .map(|row| row.iter().map(|&v| spread(v)).collect())
                .collect(),
            vec![vec![0.0; n_cells]; sigma_t.len()],
            nu_sigma_f.iter().map(|&v| spread(v)).collect(),
            chi.to_vec(),
        )
    }

    fn warn_unphysical(&self) {
        for g in 0..self.n_groups() {
            for i in 0..self.n_cells() {
                let out: f64 = (0..self.n_groups()).map(|to| self.sigma_s0[g][to][i]).sum();
                if out + self.sigma_s1[g][i].abs() > self.sigma_t[g][i] * (1.0 + 1e-12) {
                    warn!("group {g} cell {i}: scattering exceeds total cross section");
                    return;
                }
            }
        }
    }

    pub fn n_groups(&self) -> usize {
        self.sigma_t.len()
    }

    pub fn n_cells(&self) -> usize {
        self.sigma_t[0].len()
    }

    pub fn sigma_t(&self, g: usize) -> &[f64] {
        &self.sigma_t[g]
    }

    pub fn sigma_s0(&self, from: usize, to: usize) -> &[f64] {
        &self.sigma_s0[from][to]
    }

    pub fn sigma_s1(&self, g: usize) -> &[f64] {
        &self.sigma_s1[g]
    }

    pub fn nu_sigma_f(&self, g: usize) -> &[f64] {
        &self.nu_sigma_f[g]
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn group(&self, g: usize) -> GroupMaterial<'_> {
        GroupMaterial {
            sigma_t: &self.sigma_t[g],
            sigma_s0: &self.sigma_s0[g][g],
            sigma_s1: &self.sigma_s1[g],
        }
    }

    /// Total scattering out of group `g` (including self-scatter) at `cell`.
    pub fn scatter_out(&self, g: usize, cell: usize) -> f64 {
        (0..self.n_groups()).map(|to| self.sigma_s0[g][to][cell]).sum()
    }

    pub fn has_fission(&self) -> bool {
        self.nu_sigma_f.iter().flatten().any(|&v| v > 0.0)
    }

    pub fn has_anisotropy(&self) -> bool {
        self.sigma_s1.iter().flatten().any(|&v| v != 0.0)
    }

    pub fn has_upscatter(&self) -> bool {
        (0..self.n_groups())
            .any(|from| (0..from).any(|to| self.sigma_s0[from][to].iter().any(|&v| v != 0.0)))
    }
}
