//! Tensor-product Gauss-Legendre quadrature on the reference square [-1,1]^2.
//!
//! One rule (default n = 4 per direction) is used for every integral in the
//! crate: element matrices, load vectors, stress projection moments and all
//! error norms. The order is a single global knob so that quadrature
//! sensitivity can be studied from the CLI.

use crate::mesh::ElementGeometry;
use crate::{Error, Result};

/// Tensor-product Gauss-Legendre rule with `n` points per direction.
#[derive(Debug, Clone)]
pub struct GaussRule {
    n: usize,
    nodes_1d: Vec<f64>,
    weights_1d: Vec<f64>,
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

/// Builds the `n` x `n` Gauss-Legendre rule, exact for xi^p eta^q with
/// p, q <= 2n - 1.
pub fn gauss_rule(n: usize) -> Result<GaussRule> {
    if !(1..=10).contains(&n) {
        return Err(Error::QuadratureOrder(n));
    }
    let (nodes_1d, weights_1d) = legendre_rule_1d(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &eta) in nodes_1d.iter().enumerate() {
        for (j, &xi) in nodes_1d.iter().enumerate() {
            points.push((xi, eta));
            weights.push(weights_1d[i] * weights_1d[j]);
        }
    }
    Ok(GaussRule {
        n,
        nodes_1d,
        weights_1d,
        points,
        weights,
    })
}

impl GaussRule {
    /// Points per direction.
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterates (xi, eta, weight) over the tensor grid.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&(xi, eta), &w)| (xi, eta, w))
    }

    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes_1d
    }

    pub fn weights_1d(&self) -> &[f64] {
        &self.weights_1d
    }
}

/// Integrates f over a physical element: sum of w * f(x, y, xi, eta) * J(xi, eta).
pub fn integrate_on_element<F>(geom: &ElementGeometry, f: F, rule: &GaussRule) -> f64
where
    F: Fn(f64, f64, f64, f64) -> f64,
{
    rule.iter()
        .map(|(xi, eta, w)| {
            let p = geom.map_ref_to_phys(xi, eta);
            w * f(p.x, p.y, xi, eta) * geom.jacobian_det(xi, eta)
        })
        .sum()
}

/// 1D Gauss-Legendre nodes (ascending) and weights on [-1,1], by Newton
/// iteration on P_n. Accurate to ~1e-15 for n <= 10.
fn legendre_rule_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, descending from +1.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Mirror to enforce exact symmetry of the rule.
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}
