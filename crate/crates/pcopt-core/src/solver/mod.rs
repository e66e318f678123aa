//! Smooth local solvers: quasi-Newton core, augmented-Lagrangian wrapper for
//! constraints, first-order optimality reporting, and a dual-gap probe.

mod auglag;
mod bfgs;
mod classify;

pub use auglag::minimize_constrained;
pub use bfgs::minimize_unconstrained;
pub use classify::{classify_stationary_point, Classification, StationaryKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::DeterministicProblem;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub feas_tol: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub al_outer_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 500,
            grad_tol: 1e-8,
            feas_tol: 1e-8,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            al_outer_iters: 20,
        }
    }
}

impl SolveOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::Invalid("solver tolerances must be positive".into()));
        }
        if self.penalty_growth <= 1.0 {
            return Err(Error::Invalid("penalty growth must exceed 1".into()));
        }
        Ok(())
    }
}

/// First-order optimality residuals at a point with multiplier estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KKTReport {
    /// ‖∇F + Σ uᵢ∇Gᵢ + Σ vⱼ∇Hⱼ‖₂.
    pub stationarity: f64,
    /// max over constraints of Gᵢ⁺ and |Hⱼ| (0 when unconstrained).
    pub feasibility: f64,
    /// max |uᵢ Gᵢ|.
    pub complementarity: f64,
    /// max(0, −min uᵢ): how far any inequality multiplier dips negative.
    pub dual_sign: f64,
}

impl KKTReport {
    pub(crate) fn unconstrained(grad_norm: f64) -> Self {
        KKTReport {
            stationarity: grad_norm,
            feasibility: 0.0,
            complementarity: 0.0,
            dual_sign: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub a_star: Vec<f64>,
    /// Inequality multipliers, one per row.
    pub u: Vec<f64>,
    /// Equality multipliers, one per row.
    pub v: Vec<f64>,
    pub objective_value: f64,
    pub kkt: KKTReport,
    pub iterations: usize,
    pub converged: bool,
}

/// What the constrained solver needs from a problem: dimension, smooth
/// objective, and indexed constraint rows with gradients. Gradient methods
/// overwrite `grad` and return the row value.
pub trait ConstrainedProblem {
    fn dim(&self) -> usize;
    fn objective(&self, x: &[f64]) -> Result<f64>;
    fn objective_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
    fn num_inequalities(&self) -> usize;
    fn num_equalities(&self) -> usize;
    fn inequality(&self, idx: usize, x: &[f64]) -> Result<f64>;
    fn inequality_grad(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> Result<f64>;
    fn equality(&self, idx: usize, x: &[f64]) -> Result<f64>;
    fn equality_grad(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl ConstrainedProblem for DeterministicProblem {
    fn dim(&self) -> usize {
        DeterministicProblem::dim(self)
    }
    fn objective(&self, x: &[f64]) -> Result<f64> {
        DeterministicProblem::objective(self, x)
    }
    fn objective_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        DeterministicProblem::objective_grad(self, x, grad)
    }
    fn num_inequalities(&self) -> usize {
        DeterministicProblem::num_inequalities(self)
    }
    fn num_equalities(&self) -> usize {
        DeterministicProblem::num_equalities(self)
    }
    fn inequality(&self, idx: usize, x: &[f64]) -> Result<f64> {
        DeterministicProblem::inequality(self, idx, x)
    }
    fn inequality_grad(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        DeterministicProblem::inequality_grad(self, idx, x, grad)
    }
    fn equality(&self, idx: usize, x: &[f64]) -> Result<f64> {
        DeterministicProblem::equality(self, idx, x)
    }
    fn equality_grad(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        DeterministicProblem::equality_grad(self, idx, x, grad)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residuals of the first-order conditions at (a, u, v).
pub fn kkt_residual<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    a: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<KKTReport> {
    let n = problem.dim();
    if a.len() != n {
        return Err(Error::Invalid(format!(
            "point has length {}, expected {n}",
            a.len()
        )));
    }
    if u.len() != problem.num_inequalities() || v.len() != problem.num_equalities() {
        return Err(Error::Invalid(format!(
            "multiplier lengths ({}, {}) do not match constraint counts ({}, {})",
            u.len(),
            v.len(),
            problem.num_inequalities(),
            problem.num_equalities()
        )));
    }

    let mut lagr_grad = vec![0.0; n];
    let mut row = vec![0.0; n];
    problem.objective_grad(a, &mut lagr_grad)?;

    let mut feasibility = 0.0_f64;
    let mut complementarity = 0.0_f64;
    for (i, &ui) in u.iter().enumerate() {
        let g = problem.inequality_grad(i, a, &mut row)?;
        for (t, r) in lagr_grad.iter_mut().zip(&row) {
            *t += ui * r;
        }
        feasibility = feasibility.max(g.max(0.0));
        complementarity = complementarity.max((ui * g).abs());
    }
    for (j, &vj) in v.iter().enumerate() {
        let h = problem.equality_grad(j, a, &mut row)?;
        for (t, r) in lagr_grad.iter_mut().zip(&row) {
            *t += vj * r;
        }
        feasibility = feasibility.max(h.abs());
    }
    let dual_sign = u.iter().fold(0.0_f64, |worst, &ui| worst.max(-ui));

    Ok(KKTReport {
        stationarity: norm2(&lagr_grad),
        feasibility,
        complementarity,
        dual_sign,
    })
}

/// F(a*) − min_a [F(a) + Σ uᵢ Gᵢ(a) + Σ vⱼ Hⱼ(a)] at the solver's multiplier
/// estimates: zero gap certifies strong duality at the reported solution.
/// Unconstrained problems have gap 0 by definition. The inner minimization
/// starts from a*; if it fails to converge (e.g. the Lagrangian is unbounded
/// below), an error is returned.
pub fn dual_gap<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    result: &SolveResult,
) -> Result<f64> {
    if problem.num_inequalities() == 0 && problem.num_equalities() == 0 {
        return Ok(0.0);
    }
    let n = problem.dim();
    let u = result.u.clone();
    let v = result.v.clone();
    let mut row = vec![0.0; n];
    let lagrangian = |x: &[f64], grad: &mut [f64]| -> Result<f64> {
        let mut val = problem.objective_grad(x, grad)?;
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            val += ui * problem.inequality_grad(i, x, &mut row)?;
            for (t, r) in grad.iter_mut().zip(&row) {
                *t += ui * r;
            }
        }
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            val += vj * problem.equality_grad(j, x, &mut row)?;
            for (t, r) in grad.iter_mut().zip(&row) {
                *t += vj * r;
            }
        }
        Ok(val)
    };
    let opts = SolveOptions::default();
    // The dual function cannot be probed more accurately than the primal-dual
    // pair itself; demanding more invites line-search stagnation at a*.
    let target = (2.0 * result.kkt.stationarity).max(1e-8);
    let inner = bfgs::minimize_to(lagrangian, &result.a_star, &opts, Some(target))?;
    if !inner.converged {
        return Err(Error::Solver(
            "dual function evaluation did not converge; the Lagrangian may be unbounded below"
                .into(),
        ));
    }
    let f_star = problem.objective(&result.a_star)?;
    Ok(f_star - inner.objective_value)
}
