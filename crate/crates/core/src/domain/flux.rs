use serde::{Deserialize, Serialize};

/// Scalar flux (and net current) of one energy group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFlux {
    pub phi: Vec<f64>,
    /// `J = ∫ μ ψ dμ`; only drives the solution when `Σ_s1 ≠ 0`.
    pub current: Vec<f64>,
}

impl GroupFlux {
    pub fn zeros(n_cells: usize) -> Self {
        Self {
            phi: vec![0.0; n_cells],
            current: vec![0.0; n_cells],
        }
    }

    pub fn from_phi(phi: Vec<f64>) -> Self {
        let n = phi.len();
        Self {
            phi,
            current: vec![0.0; n],
        }
    }
}

/// Multigroup scalar flux on cell centers, `phi[g][cell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    pub phi: Vec<Vec<f64>>,
    pub current: Option<Vec<Vec<f64>>>,
}

impl FluxField {
    pub fn flat(n_groups: usize, n_cells: usize, value: f64) -> Self {
        Self {
            phi: vec![vec![value; n_cells]; n_groups],
            current: None,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.phi.len()
    }

    pub fn group(&self, g: usize) -> GroupFlux {
        let phi = self.phi[g].clone();
        match &self.current {
            Some(j) => GroupFlux {
                phi,
                current: j[g].clone(),
            },
            None => GroupFlux::from_phi(phi),
        }
    }

    pub fn from_groups(groups: Vec<GroupFlux>, keep_current: bool) -> Self {
        let mut phi = Vec::with_capacity(groups.len());
        let mut current = Vec::with_capacity(groups.len());
        for g in groups {
            phi.push(g.phi);
            current.push(g.current);
        }
        Self {
            phi,
            current: keep_current.then_some(current),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.phi.iter_mut().flatten() {
            *v *= factor;
        }
        if let Some(j) = &mut self.current {
            for v in j.iter_mut().flatten() {
                *v *= factor;
            }
        }
    }
}
