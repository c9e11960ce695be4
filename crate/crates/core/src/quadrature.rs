//! One-dimensional Gauss rules and tensorized helpers.
//!
//! Rules are generated with the Golub–Welsch algorithm: nodes are the
//! eigenvalues of the Jacobi matrix of the orthogonal-polynomial recurrence,
//! weights come from the first components of the normalized eigenvectors.

use alloc::vec::Vec;
use nalgebra::DMatrix;

/// Nodes and weights of a 1D quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Affine image of the rule on `[a, b]`; weights carry the interval scale.
    pub fn mapped_to(&self, a: f64, b: f64) -> GaussRule {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GaussRule {
            nodes: self.nodes.iter().map(|&t| mid + half * t).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Solves the symmetric tridiagonal eigenproblem of the three-term recurrence
/// with off-diagonal entries `beta[k]`, diagonal zero, and total mass `mu0`.
fn golub_welsch(beta: &[f64], mu0: f64) -> GaussRule {
    let n = beta.len() + 1;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for (k, &b) in beta.iter().enumerate() {
        jac[(k, k + 1)] = b;
        jac[(k + 1, k)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]` (total weight 2).
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1, "at least one quadrature point");
    let beta: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / crate::num::sqrt(4.0 * k * k - 1.0)
        })
        .collect();
    golub_welsch(&beta, 2.0)
}

/// `n`-point probabilists' Gauss–Hermite rule: integrates against the
/// standard normal density, total weight 1.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 1, "at least one quadrature point");
    let beta: Vec<f64> = (1..n).map(|k| crate::num::sqrt(k as f64)).collect();
    golub_welsch(&beta, 1.0)
}

/// Tensorized 2D Gauss–Legendre rule on the reference square `[-1,1]²`.
pub fn gauss_legendre_2d(n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let g = gauss_legendre(n);
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pts.push([g.nodes[i], g.nodes[j]]);
            wts.push(g.weights[i] * g.weights[j]);
        }
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_low_order_nodes() {
        let g = gauss_legendre(2);
        let r = 1.0 / crate::num::sqrt(3.0);
        assert!((g.nodes[0] + r).abs() < 1e-14);
        assert!((g.nodes[1] - r).abs() < 1e-14);
        assert!((g.weights[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_polynomial_exactness() {
        // n points are exact through degree 2n-1.
        for n in 1..=12 {
            let g = gauss_legendre(n);
            for d in 0..=(2 * n - 1) {
                let exact = if d % 2 == 0 {
                    2.0 / (d as f64 + 1.0)
                } else {
                    0.0
                };
                let got = g.integrate(|x| crate::num::powi(x, d as i32));
                assert!(
                    (got - exact).abs() < 1e-13,
                    "n={n} d={d}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn hermite_moments() {
        // E[1]=1, E[x^2]=1, E[x^4]=3, E[x^6]=15 once enough points are used.
        let g = gauss_hermite(4);
        assert!((g.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((g.integrate(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((g.integrate(|x| crate::num::powi(x, 4)) - 3.0).abs() < 1e-12);
        assert!((g.integrate(|x| crate::num::powi(x, 6)) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn hermite_three_points_handles_quartic() {
        let g = gauss_hermite(3);
        assert!((g.integrate(|x| crate::num::powi(x, 4)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mapped_rule_scales_weights() {
        let g = gauss_legendre(6).mapped_to(500.0, 1500.0);
        let total: f64 = g.weights.iter().sum();
        assert!((total - 1000.0).abs() < 1e-9);
        let mean = g.integrate(|x| x) / 1000.0;
        assert!((mean - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn high_order_legendre_stays_accurate() {
        // 200-point rule used by the covariance eigen-solver.
        let g = gauss_legendre(200);
        let total: f64 = g.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
        let got = g.integrate(|x| crate::num::cos(x));
        let exact = 2.0 * crate::num::sin(1.0);
        assert!((got - exact).abs() < 1e-13);
    }
}
