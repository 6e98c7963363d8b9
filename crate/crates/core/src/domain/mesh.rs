use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform slab mesh on `[0, length_cm]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid1D {
    length_cm: f64,
    n_cells: usize,
    cell_width_cm: f64,
    centers: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    length_cm: f64,
    n_cells: usize,
}

impl TryFrom<GridSpec> for Grid1D {
    type Error = crate::Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid1D::new(spec.length_cm, spec.n_cells)
    }
}

impl From<Grid1D> for GridSpec {
    fn from(grid: Grid1D) -> Self {
        GridSpec {
            length_cm: grid.length_cm,
            n_cells: grid.n_cells,
        }
    }
}

impl Grid1D {
    pub fn new(length_cm: f64, n_cells: usize) -> Result<Self> {
        if !(length_cm.is_finite() && length_cm > 0.0) {
            return Err(invalid(format!("slab length must be positive, got {length_cm}")));
        }
        if n_cells == 0 {
            return Err(invalid("grid needs at least one cell"));
        }
        let dx = length_cm / n_cells as f64;
        let centers = (0..n_cells).map(|i| (i as f64 + 0.5) * dx).collect();
        Ok(Self {
            length_cm,
            n_cells,
            cell_width_cm: dx,
            centers,
        })
    }

    pub fn length(&self) -> f64 {
        self.length_cm
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.cell_width_cm
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Same slab, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.length_cm, self.n_cells * factor)
    }

    pub(crate) fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n_cells {
            return Err(invalid(format!(
                "{what} has {len} entries, grid has {} cells",
                self.n_cells
            )));
        }
        Ok(())
    }
}

/// Midpoint-rule integral `Σ field_i Δx`.
pub fn integrate_cellwise(field: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check_len("field", field.len())?;
    Ok(field.iter().sum::<f64>() * grid.dx())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid() {
        let grid = Grid1D::new(10.0, 100).unwrap();
        assert!((grid.dx() * 100.0 - 10.0).abs() <= 1e-12 * 10.0);
        assert!((grid.centers()[0] - 0.05).abs() < 1e-15);
        let last = *grid.centers().last().unwrap();
        assert!((last + grid.dx() / 2.0 - grid.length()).abs() < 1e-12);
        assert!(grid.centers().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(0.0, 10).is_err());
        assert!(Grid1D::new(-1.0, 10).is_err());
        assert!(Grid1D::new(1.0, 0).is_err());
        assert!(Grid1D::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn cellwise_integrals() {
        let grid = Grid1D::new(10.0, 100).unwrap();
        let v = integrate_cellwise(&vec![0.1; 100], &grid).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(integrate_cellwise(&vec![0.0; 100], &grid).unwrap(), 0.0);
        let linear = integrate_cellwise(grid.centers(), &grid).unwrap();
        assert!((linear - 50.0).abs() < 1e-12);
        assert!(integrate_cellwise(&[1.0; 3], &grid).is_err());
    }
}
