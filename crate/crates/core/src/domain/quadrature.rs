use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Gauss-Legendre S_N set on `[-1, 1]`.
///
/// Nodes are stored in ascending order, so direction `n` and direction
/// `order - 1 - n` are mirror images (`mu[n] == -mu[order - 1 - n]` exactly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadratureSpec", into = "QuadratureSpec")]
pub struct AngularQuadrature {
    mu: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct QuadratureSpec {
    order: usize,
}

impl TryFrom<QuadratureSpec> for AngularQuadrature {
    type Error = crate::Error;

    fn try_from(spec: QuadratureSpec) -> Result<Self> {
        gauss_legendre(spec.order)
    }
}

impl From<AngularQuadrature> for QuadratureSpec {
    fn from(q: AngularQuadrature) -> Self {
        QuadratureSpec { order: q.order() }
    }
}

impl AngularQuadrature {
    pub fn order(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Index of the direction with cosine `-mu[n]`.
    pub fn mirror(&self, n: usize) -> usize {
        self.mu.len() - 1 - n
    }

    /// Quadrature approximation of `∫_{-1}^{1} f(μ) dμ`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.mu.iter().zip(&self.w).map(|(&m, &w)| w * f(m)).sum()
    }
}

/// Gauss-Legendre nodes and weights of even order `2 ≤ order ≤ 128`.
pub fn gauss_legendre(order: usize) -> Result<AngularQuadrature> {
    if order % 2 != 0 || !(2..=128).contains(&order) {
        return Err(invalid(format!(
            "quadrature order must be even and in [2, 128], got {order}"
        )));
    }
    let half = order / 2;
    let mut pos = Vec::with_capacity(half);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root, then Newton.
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pos.push((x, w));
    }
    // `pos` runs from the largest root downward; build ascending order.
    let mut mu = Vec::with_capacity(order);
    let mut w = Vec::with_capacity(order);
    for &(x, wt) in &pos {
        mu.push(-x);
        w.push(wt);
    }
    for &(x, wt) in pos.iter().rev() {
        mu.push(x);
        w.push(wt);
    }
    Ok(AngularQuadrature { mu, w })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(k: usize) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn two_point_rule() {
        let q = gauss_legendre(2).unwrap();
        assert!((q.mu()[1] - 0.5773502691896258).abs() < 1e-15);
        assert!((q.mu()[0] + 0.5773502691896258).abs() < 1e-15);
        assert!((q.weights()[0] - 1.0).abs() < 1e-15);
        assert!((q.weights()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn four_point_moments() {
        let q = gauss_legendre(4).unwrap();
        assert!((q.weights().iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!((q.integrate(|m| m * m) - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn s32_sixth_moment() {
        let q = gauss_legendre(32).unwrap();
        assert!((q.integrate(|m| m.powi(6)) - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn exact_to_degree_2n_minus_1() {
        let q = gauss_legendre(8).unwrap();
        for k in 0..=9 {
            let got = q.integrate(|m| m.powi(k as i32));
            assert!((got - monomial_integral(k)).abs() < 1e-12, "degree {k}: {got}");
        }
        for k in 10..16 {
            let got = q.integrate(|m| m.powi(k as i32));
            assert!((got - monomial_integral(k)).abs() < 1e-12, "degree {k}");
        }
    }

    #[test]
    fn invariants_every_order() {
        for order in (2..=128).step_by(2) {
            let q = gauss_legendre(order).unwrap();
            assert_eq!(q.order(), order);
            assert!((q.weights().iter().sum::<f64>() - 2.0).abs() < 1e-13, "order {order}");
            assert!(q.integrate(|m| m).abs() < 1e-13);
            assert!((q.integrate(|m| m * m) - 2.0 / 3.0).abs() < 1e-12);
            for n in 0..order {
                assert_eq!(q.mu()[n], -q.mu()[q.mirror(n)]);
                assert_eq!(q.weights()[n], q.weights()[q.mirror(n)]);
                assert!(q.mu()[n].abs() < 1.0 && q.weights()[n] > 0.0);
            }
            assert!(q.mu().windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn rejects_bad_orders() {
        for order in [0, 1, 3, 33, 130] {
            assert!(gauss_legendre(order).is_err());
        }
    }
}
