//! Deterministic reformulation in expansion coefficients.
//!
//! A stochastic problem in d decision variables becomes a smooth problem in
//! d·T coefficients: each decision variable is expanded in the orthonormal
//! basis, and every expectation is replaced by its quadrature sum. Constraints
//! are enforced either in expectation (one row per source constraint) or by
//! collocation (one row per source constraint per quadrature node).
//!
//! Coefficient layout is row-major by variable: entry i·T + k is the k-th
//! coefficient of variable i. Node sums always run in ascending node order so
//! results are bitwise reproducible.

use serde::{Deserialize, Serialize};

use crate::compile::{compile_problem, Compiled, CompiledProblem};
use crate::error::{Error, Result};
use crate::orthopoly::Basis;
use crate::pce::Expansion;
use crate::problem::{Sense, StochasticProblem};
use crate::quadrature::{gauss_rule, QuadratureGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// One row per constraint: the weighted node average must satisfy the
    /// relation.
    Expectation,
    /// One row per (constraint, node): the relation must hold at every
    /// quadrature node.
    Collocation,
}

/// Per-expression evaluation plan. Affine expressions reduce to a sparse dot
/// product in coefficient space with a per-node offset; everything else walks
/// the expression tree at each node.
#[derive(Debug, Clone)]
enum Plan {
    Affine {
        coeffs: Vec<(usize, f64)>,
        offsets: Vec<f64>,
    },
    General,
}

/// Smooth deterministic problem over expansion coefficients.
#[derive(Debug, Clone)]
pub struct DeterministicProblem {
    basis: Basis,
    grid: QuadratureGrid,
    compiled: CompiledProblem,
    mode: ConstraintMode,
    sense: Sense,
    d: usize,
    terms: usize,
    /// ψ_k(ξ_q), laid out q·T + k.
    psi: Vec<f64>,
    /// Physical parameter values at the nodes, laid out q·p + j.
    lam: Vec<f64>,
    obj_plan: Plan,
    ineq_plans: Vec<Plan>,
    eq_plans: Vec<Plan>,
}

/// Reformulates `prob` over the given basis and quadrature grid. The basis
/// families must match the problem's random parameters and the grid dimension
/// must equal the number of random parameters.
pub fn transform(
    prob: &StochasticProblem,
    basis: Basis,
    grid: QuadratureGrid,
    mode: ConstraintMode,
) -> Result<DeterministicProblem> {
    if basis.families() != prob.families().as_slice() {
        return Err(Error::Invalid(format!(
            "basis families {:?} do not match the problem's random parameters {:?}",
            basis.families(),
            prob.families()
        )));
    }
    if grid.dim() != prob.p() {
        return Err(Error::Invalid(format!(
            "quadrature grid dimension {} does not match {} random parameters",
            grid.dim(),
            prob.p()
        )));
    }
    let compiled = compile_problem(prob)?;
    let d = prob.d();
    let terms = basis.len();
    let nodes = grid.len();

    let mut psi = Vec::with_capacity(nodes * terms);
    let mut lam = Vec::with_capacity(nodes * prob.p());
    for q in 0..nodes {
        let point = grid.node(q);
        for t in 0..terms {
            psi.push(basis.eval_term(t, point)?);
        }
        for (j, (_, dist)) in prob.randoms().iter().enumerate() {
            lam.push(dist.standardize(point[j])?);
        }
    }

    let plan_for = |c: &Compiled| -> Plan {
        match &c.affine {
            Some(aff) => Plan::Affine {
                coeffs: aff
                    .x_coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect(),
                offsets: (0..nodes)
                    .map(|q| aff.offset_at(&lam[q * prob.p()..(q + 1) * prob.p()]))
                    .collect(),
            },
            None => Plan::General,
        }
    };
    let obj_plan = plan_for(&compiled.objective);
    let ineq_plans = compiled.inequalities.iter().map(plan_for).collect();
    let eq_plans = compiled.equalities.iter().map(plan_for).collect();

    Ok(DeterministicProblem {
        basis,
        grid,
        mode,
        sense: prob.sense(),
        d,
        terms,
        psi,
        lam,
        obj_plan,
        ineq_plans,
        eq_plans,
        compiled,
    })
}

/// Convenience wrapper: basis of the problem's families at `order`, tensor
/// grid with `quad_points` nodes per random parameter.
pub fn transform_with(
    prob: &StochasticProblem,
    order: usize,
    quad_points: usize,
    mode: ConstraintMode,
) -> Result<DeterministicProblem> {
    let families = prob.families();
    let basis = Basis::new(families.clone(), order)?;
    let rules = families
        .iter()
        .map(|&f| gauss_rule(f, quad_points))
        .collect::<Result<Vec<_>>>()?;
    let grid = QuadratureGrid::tensor(&rules)?;
    transform(prob, basis, grid, mode)
}

impl DeterministicProblem {
    /// Length of the coefficient vector (d·T).
    pub fn dim(&self) -> usize {
        self.d * self.terms
    }

    pub fn decision_dim(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    /// Sense of the source problem. The reformulated objective is always
    /// minimized; reports flip the sign back for maximization problems.
    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn weights(&self) -> &[f64] {
        self.grid.weights()
    }

    /// Physical random-parameter vector at node q.
    pub fn lambda_node(&self, q: usize) -> &[f64] {
        let p = self.compiled.p;
        &self.lam[q * p..(q + 1) * p]
    }

    pub fn num_inequalities(&self) -> usize {
        match self.mode {
            ConstraintMode::Expectation => self.compiled.inequalities.len(),
            ConstraintMode::Collocation => self.compiled.inequalities.len() * self.grid.len(),
        }
    }

    pub fn num_equalities(&self) -> usize {
        match self.mode {
            ConstraintMode::Expectation => self.compiled.equalities.len(),
            ConstraintMode::Collocation => self.compiled.equalities.len() * self.grid.len(),
        }
    }

    /// Coefficient vector viewed as an expansion of the decision variables.
    pub fn expansion(&self, a: &[f64]) -> Result<Expansion> {
        Expansion::new(self.basis.clone(), self.d, a.to_vec())
    }

    fn check_dim(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "coefficient vector has length {}, expected {}",
                a.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Reconstructs all decision variables at node q.
    fn decisions_at(&self, a: &[f64], q: usize, x: &mut [f64]) {
        let t = self.terms;
        let psi = &self.psi[q * t..(q + 1) * t];
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &a[i * t..(i + 1) * t];
            *xi = row.iter().zip(psi).map(|(c, s)| c * s).sum();
        }
    }

    fn value_at(&self, comp: &Compiled, plan: &Plan, a: &[f64], q: usize, x: &mut [f64]) -> Result<f64> {
        match plan {
            Plan::Affine { coeffs, offsets } => {
                let t = self.terms;
                let psi = &self.psi[q * t..(q + 1) * t];
                let mut v = offsets[q];
                for &(i, c) in coeffs {
                    let row = &a[i * t..(i + 1) * t];
                    v += c * row.iter().zip(psi).map(|(ak, s)| ak * s).sum::<f64>();
                }
                Ok(v)
            }
            Plan::General => {
                self.decisions_at(a, q, x);
                comp.eval(x, self.lambda_node(q))
            }
        }
    }

    /// Adds `scale · ∂(expression at node q)/∂a` into `grad`, returning the
    /// expression value. ∂/∂a_{i,k} = (∂f/∂x_i at the node) · ψ_k(ξ_q).
    fn add_grad_at(
        &self,
        comp: &Compiled,
        plan: &Plan,
        a: &[f64],
        q: usize,
        scale: f64,
        grad: &mut [f64],
        x: &mut [f64],
    ) -> Result<f64> {
        let t = self.terms;
        let psi = &self.psi[q * t..(q + 1) * t];
        match plan {
            Plan::Affine { coeffs, offsets } => {
                let mut v = offsets[q];
                for &(i, c) in coeffs {
                    let row = &a[i * t..(i + 1) * t];
                    v += c * row.iter().zip(psi).map(|(ak, s)| ak * s).sum::<f64>();
                    for (gk, s) in grad[i * t..(i + 1) * t].iter_mut().zip(psi) {
                        *gk += scale * c * s;
                    }
                }
                Ok(v)
            }
            Plan::General => {
                self.decisions_at(a, q, x);
                let lamq = self.lambda_node(q);
                let mut value = 0.0;
                for i in 0..self.d {
                    let (v, df) = comp.eval_dx(x, lamq, i)?;
                    if i == 0 {
                        value = v;
                    }
                    for (gk, s) in grad[i * t..(i + 1) * t].iter_mut().zip(psi) {
                        *gk += scale * df * s;
                    }
                }
                Ok(value)
            }
        }
    }

    fn weighted_value(&self, comp: &Compiled, plan: &Plan, a: &[f64]) -> Result<f64> {
        let mut x = vec![0.0; self.d];
        let mut total = 0.0;
        for (q, &w) in self.grid.weights().iter().enumerate() {
            total += w * self.value_at(comp, plan, a, q, &mut x)?;
        }
        Ok(total)
    }

    fn weighted_grad(&self, comp: &Compiled, plan: &Plan, a: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut x = vec![0.0; self.d];
        let mut total = 0.0;
        for (q, &w) in self.grid.weights().iter().enumerate() {
            total += w * self.add_grad_at(comp, plan, a, q, w, grad, &mut x)?;
        }
        Ok(total)
    }

    /// F(a) = Σ_q w_q f(x_a(ξ_q), λ(ξ_q)).
    pub fn objective(&self, a: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        self.weighted_value(&self.compiled.objective, &self.obj_plan, a)
    }

    /// Fills `grad` with ∇F and returns F.
    pub fn objective_grad(&self, a: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_dim(a)?;
        assert_eq!(grad.len(), self.dim());
        grad.fill(0.0);
        self.weighted_grad(&self.compiled.objective, &self.obj_plan, a, grad)
    }

    /// Splits a row index into (scalar constraint, node) per the active mode.
    fn locate(&self, idx: usize) -> (usize, Option<usize>) {
        match self.mode {
            ConstraintMode::Expectation => (idx, None),
            ConstraintMode::Collocation => {
                let nodes = self.grid.len();
                (idx / nodes, Some(idx % nodes))
            }
        }
    }

    pub fn inequality(&self, idx: usize, a: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        let (c, node) = self.locate(idx);
        let comp = &self.compiled.inequalities[c];
        let plan = &self.ineq_plans[c];
        match node {
            None => self.weighted_value(comp, plan, a),
            Some(q) => {
                let mut x = vec![0.0; self.d];
                self.value_at(comp, plan, a, q, &mut x)
            }
        }
    }

    pub fn inequality_grad(&self, idx: usize, a: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_dim(a)?;
        assert_eq!(grad.len(), self.dim());
        grad.fill(0.0);
        let (c, node) = self.locate(idx);
        let comp = &self.compiled.inequalities[c];
        let plan = &self.ineq_plans[c];
        match node {
            None => self.weighted_grad(comp, plan, a, grad),
            Some(q) => {
                let mut x = vec![0.0; self.d];
                self.add_grad_at(comp, plan, a, q, 1.0, grad, &mut x)
            }
        }
    }

    pub fn equality(&self, idx: usize, a: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        let (c, node) = self.locate(idx);
        let comp = &self.compiled.equalities[c];
        let plan = &self.eq_plans[c];
        match node {
            None => self.weighted_value(comp, plan, a),
            Some(q) => {
                let mut x = vec![0.0; self.d];
                self.value_at(comp, plan, a, q, &mut x)
            }
        }
    }

    pub fn equality_grad(&self, idx: usize, a: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_dim(a)?;
        assert_eq!(grad.len(), self.dim());
        grad.fill(0.0);
        let (c, node) = self.locate(idx);
        let comp = &self.compiled.equalities[c];
        let plan = &self.eq_plans[c];
        match node {
            None => self.weighted_grad(comp, plan, a, grad),
            Some(q) => {
                let mut x = vec![0.0; self.d];
                self.add_grad_at(comp, plan, a, q, 1.0, grad, &mut x)
            }
        }
    }
}
