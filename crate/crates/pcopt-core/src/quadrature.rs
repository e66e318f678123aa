//! Gauss quadrature rules from recurrence coefficients.
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix and
//! weights come from the first components of its eigenvectors. The
//! eigenproblem is solved with an implicitly shifted QL iteration that
//! tracks only the first row of the accumulated rotations, which is all the
//! weight formula needs.

use crate::error::{Error, Result};
use crate::orthopoly::PolynomialFamily;

const QL_TOL: f64 = 1e-14;
const QL_MAX_SWEEPS: usize = 50;

/// One-dimensional Gauss rule; nodes ascending, weights summing to the
/// total mass of the weight function (1 for the families in this crate).
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// n-point Gauss rule for the given family. Exact for polynomials up to
/// degree 2n - 1 against the family's probability density.
pub fn gauss_rule(family: PolynomialFamily, n: usize) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::Invalid("quadrature rule needs at least one node".into()));
    }
    let (alpha, beta) = family.recurrence_coeffs(n);
    let mut d = alpha;
    // Off-diagonal of the Jacobi matrix, padded with a trailing zero so the
    // QL sweep can address e[m] at the boundary.
    let mut e: Vec<f64> = (1..n).map(|k| beta[k].sqrt()).collect();
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    let scale = d
        .iter()
        .chain(e.iter())
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= QL_TOL * dd.max(scale) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::Numerical(format!(
                    "eigenvalue iteration stalled after {QL_MAX_SWEEPS} sweeps (n = {n})"
                )));
            }
            // Wilkinson shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Deflate: a rotation annihilated the subdiagonal early.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let beta0 = beta[0];
    let mut pairs: Vec<(f64, f64)> = d
        .into_iter()
        .zip(z)
        .map(|(node, z0)| (node, beta0 * z0 * z0))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Tensor product of one-dimensional rules, flattened to row-major order:
/// the first dimension varies slowest, the last fastest.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn tensor(rules: &[GaussRule]) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Invalid("tensor grid needs at least one rule".into()));
        }
        let dim = rules.len();
        let count: usize = rules.iter().map(|r| r.nodes.len()).product();
        let mut nodes = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        let mut odometer = vec![0usize; dim];
        for _ in 0..count {
            let mut w = 1.0;
            for (d, &i) in odometer.iter().enumerate() {
                nodes.push(rules[d].nodes[i]);
                w *= rules[d].weights[i];
            }
            weights.push(w);
            for d in (0..dim).rev() {
                odometer[d] += 1;
                if odometer[d] < rules[d].nodes.len() {
                    break;
                }
                odometer[d] = 0;
            }
        }
        Ok(QuadratureGrid { dim, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Coordinates of the q-th point.
    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.dim..(q + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
