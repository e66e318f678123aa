//! Chaos expansions of decision vectors and their statistical moments.

use crate::error::{Error, Result};
use crate::orthopoly::Basis;
use crate::quadrature::QuadratureGrid;
use serde::{Deserialize, Serialize};

/// Number of scalar unknowns when d decision variables are expanded to
/// total degree r in p random dimensions: d·(r+p)!/(r!·p!).
pub fn num_terms(d: usize, r: usize, p: usize) -> usize {
    let mut per_var = 1usize;
    for i in 0..p {
        per_var = per_var * (r + i + 1) / (i + 1);
    }
    d * per_var
}

/// Expansion of a d-dimensional decision vector: row i holds the
/// coefficients of x_i over the basis terms, so x_i(ξ) = Σ_k a_{i,k} ψ_k(ξ).
#[derive(Debug, Clone)]
pub struct Expansion {
    basis: Basis,
    dim: usize,
    coeffs: Vec<f64>, // row-major, dim × basis.len()
}

impl Expansion {
    pub fn new(basis: Basis, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("expansion needs at least one decision variable".into()));
        }
        if coeffs.len() != dim * basis.len() {
            return Err(Error::Invalid(format!(
                "expansion of {} variables over {} terms needs {} coefficients, got {}",
                dim,
                basis.len(),
                dim * basis.len(),
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!("non-finite expansion coefficient {bad}")));
        }
        Ok(Expansion { basis, dim, coeffs })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Number of decision variables d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis terms per variable.
    pub fn terms(&self) -> usize {
        self.basis.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, var: usize, term: usize) -> f64 {
        self.coeffs[var * self.basis.len() + term]
    }

    pub fn row(&self, var: usize) -> &[f64] {
        let t = self.basis.len();
        &self.coeffs[var * t..(var + 1) * t]
    }

    /// Rows as a table, convenient for reports.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// x(ξ) for a standardized random point ξ of length p.
    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let t = self.basis.len();
        let mut psi = vec![0.0; t];
        for (k, idx) in self.basis.index_set().iter().enumerate() {
            psi[k] = self.basis.eval_index(idx, xi)?;
        }
        Ok((0..self.dim)
            .map(|i| self.row(i).iter().zip(&psi).map(|(a, p)| a * p).sum())
            .collect())
    }
}

/// Per-variable statistics of an expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Row t holds the central moments μ_{t+2} of every variable;
    /// absent when only mean/std were requested.
    pub central_moments: Option<Vec<Vec<f64>>>,
}

/// Moments of an expansion: mean and std from the coefficients directly
/// (orthonormality), central moments μ_2..μ_max_k by quadrature of
/// (x(ξ) − mean)^k. The rule must integrate degree max_k·r exactly; an
/// under-resolved rule is detected by μ₂ disagreeing with the
/// coefficient-space variance.
pub fn moments(exp: &Expansion, rule: &QuadratureGrid, max_k: usize) -> Result<MomentSummary> {
    if rule.dim() != exp.basis().dimension() {
        return Err(Error::Invalid(format!(
            "moment rule dimension {} does not match basis dimension {}",
            rule.dim(),
            exp.basis().dimension()
        )));
    }
    let d = exp.dim();
    let mean: Vec<f64> = (0..d).map(|i| exp.coeff(i, 0)).collect();
    let std: Vec<f64> = (0..d)
        .map(|i| exp.row(i)[1..].iter().map(|a| a * a).sum::<f64>().sqrt())
        .collect();

    let central = if max_k >= 2 {
        let mut table = vec![vec![0.0; d]; max_k - 1];
        for q in 0..rule.len() {
            let w = rule.weights()[q];
            let x = exp.evaluate(rule.node(q))?;
            for i in 0..d {
                let dev = x[i] - mean[i];
                let mut pow = dev * dev;
                for row in table.iter_mut() {
                    row[i] += w * pow;
                    pow *= dev;
                }
            }
        }
        for i in 0..d {
            let var = std[i] * std[i];
            if (table[0][i] - var).abs() > 1e-10 * 1.0_f64.max(var) {
                return Err(Error::Inconsistency(format!(
                    "second central moment {} of variable {} disagrees with coefficient variance {}; \
                     the {}-point rule does not resolve the expansion",
                    table[0][i],
                    i,
                    var,
                    rule.len()
                )));
            }
        }
        Some(table)
    } else {
        None
    };

    Ok(MomentSummary {
        mean,
        std,
        central_moments: central,
    })
}
