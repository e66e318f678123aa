//! Slot-resolved expressions for repeated evaluation.
//!
//! Parsing produces name-based trees; the numeric layers below (transform,
//! Monte Carlo, diagnostics) evaluate the same expression at thousands of
//! points, so names are resolved to decision/random indices once. Affine
//! expressions are additionally recognized and carry their coefficient rows,
//! which turns constraint evaluation and gradients of linear programs into
//! dot products.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::problem::{Sense, StochasticProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Decision(usize),
    Random(usize),
}

#[derive(Debug, Clone)]
enum CExpr {
    Const(f64),
    Var(Slot),
    Add(Box<CExpr>, Box<CExpr>),
    Sub(Box<CExpr>, Box<CExpr>),
    Mul(Box<CExpr>, Box<CExpr>),
    Div(Box<CExpr>, Box<CExpr>),
    Neg(Box<CExpr>),
    Pow(Box<CExpr>, u32),
}

/// c + Σ xc_i·x_i + Σ lc_j·λ_j with constant coefficients.
#[derive(Debug, Clone)]
pub(crate) struct Affine {
    pub constant: f64,
    pub x_coeffs: Vec<f64>,
    pub lam_coeffs: Vec<f64>,
}

impl Affine {
    fn zero(d: usize, p: usize) -> Self {
        Affine {
            constant: 0.0,
            x_coeffs: vec![0.0; d],
            lam_coeffs: vec![0.0; p],
        }
    }

    fn constant_only(&self) -> bool {
        self.x_coeffs.iter().chain(&self.lam_coeffs).all(|&c| c == 0.0)
    }

    fn scaled(&self, s: f64) -> Self {
        Affine {
            constant: self.constant * s,
            x_coeffs: self.x_coeffs.iter().map(|c| c * s).collect(),
            lam_coeffs: self.lam_coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn combined(&self, other: &Affine, sign: f64) -> Self {
        Affine {
            constant: self.constant + sign * other.constant,
            x_coeffs: self
                .x_coeffs
                .iter()
                .zip(&other.x_coeffs)
                .map(|(a, b)| a + sign * b)
                .collect(),
            lam_coeffs: self
                .lam_coeffs
                .iter()
                .zip(&other.lam_coeffs)
                .map(|(a, b)| a + sign * b)
                .collect(),
        }
    }

    /// Constant part once the random parameters are fixed.
    pub fn offset_at(&self, lam: &[f64]) -> f64 {
        self.constant + self.lam_coeffs.iter().zip(lam).map(|(c, l)| c * l).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64], lam: &[f64]) -> f64 {
        self.offset_at(lam) + self.x_coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// One expression resolved against a problem's name spaces.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    expr: CExpr,
    pub affine: Option<Affine>,
    d: usize,
    p: usize,
}

impl Compiled {
    pub fn new(e: &Expr, decisions: &[String], randoms: &[String]) -> Result<Self> {
        let expr = resolve(e, decisions, randoms)?;
        let affine = extract_affine(&expr, decisions.len(), randoms.len());
        Ok(Compiled {
            expr,
            affine,
            d: decisions.len(),
            p: randoms.len(),
        })
    }

    pub fn eval(&self, x: &[f64], lam: &[f64]) -> Result<f64> {
        debug_assert!(x.len() == self.d && lam.len() == self.p);
        if let Some(aff) = &self.affine {
            return Ok(aff.eval(x, lam));
        }
        Ok(eval_dual(&self.expr, x, lam, None)?.0)
    }

    /// Value together with ∂/∂x_i, by a forward pass carrying one dual.
    pub fn eval_dx(&self, x: &[f64], lam: &[f64], i: usize) -> Result<(f64, f64)> {
        if let Some(aff) = &self.affine {
            return Ok((aff.eval(x, lam), aff.x_coeffs[i]));
        }
        eval_dual(&self.expr, x, lam, Some(Slot::Decision(i)))
    }

    /// Value with the full decision gradient written into `grad`.
    pub fn eval_grad_x(&self, x: &[f64], lam: &[f64], grad: &mut [f64]) -> Result<f64> {
        debug_assert_eq!(grad.len(), self.d);
        if let Some(aff) = &self.affine {
            grad.copy_from_slice(&aff.x_coeffs);
            return Ok(aff.eval(x, lam));
        }
        if self.d == 0 {
            return self.eval(x, lam);
        }
        let mut value = 0.0;
        for i in 0..self.d {
            let (v, dv) = self.eval_dx(x, lam, i)?;
            if i == 0 {
                value = v;
            }
            grad[i] = dv;
        }
        Ok(value)
    }
}

fn resolve(e: &Expr, decisions: &[String], randoms: &[String]) -> Result<CExpr> {
    Ok(match e {
        Expr::Const(c) => CExpr::Const(*c),
        Expr::Var(name) => {
            if let Some(i) = decisions.iter().position(|d| d == name) {
                CExpr::Var(Slot::Decision(i))
            } else if let Some(j) = randoms.iter().position(|r| r == name) {
                CExpr::Var(Slot::Random(j))
            } else {
                return Err(Error::Invalid(format!("undeclared identifier `{name}`")));
            }
        }
        Expr::Add(a, b) => CExpr::Add(
            Box::new(resolve(a, decisions, randoms)?),
            Box::new(resolve(b, decisions, randoms)?),
        ),
        Expr::Sub(a, b) => CExpr::Sub(
            Box::new(resolve(a, decisions, randoms)?),
            Box::new(resolve(b, decisions, randoms)?),
        ),
        Expr::Mul(a, b) => CExpr::Mul(
            Box::new(resolve(a, decisions, randoms)?),
            Box::new(resolve(b, decisions, randoms)?),
        ),
        Expr::Div(a, b) => CExpr::Div(
            Box::new(resolve(a, decisions, randoms)?),
            Box::new(resolve(b, decisions, randoms)?),
        ),
        Expr::Neg(a) => CExpr::Neg(Box::new(resolve(a, decisions, randoms)?)),
        Expr::Pow(a, n) => CExpr::Pow(Box::new(resolve(a, decisions, randoms)?), *n),
    })
}

fn extract_affine(e: &CExpr, d: usize, p: usize) -> Option<Affine> {
    Some(match e {
        CExpr::Const(c) => {
            let mut a = Affine::zero(d, p);
            a.constant = *c;
            a
        }
        CExpr::Var(slot) => {
            let mut a = Affine::zero(d, p);
            match slot {
                Slot::Decision(i) => a.x_coeffs[*i] = 1.0,
                Slot::Random(j) => a.lam_coeffs[*j] = 1.0,
            }
            a
        }
        CExpr::Add(l, r) => extract_affine(l, d, p)?.combined(&extract_affine(r, d, p)?, 1.0),
        CExpr::Sub(l, r) => extract_affine(l, d, p)?.combined(&extract_affine(r, d, p)?, -1.0),
        CExpr::Neg(a) => extract_affine(a, d, p)?.scaled(-1.0),
        CExpr::Mul(l, r) => {
            let la = extract_affine(l, d, p)?;
            let ra = extract_affine(r, d, p)?;
            if la.constant_only() {
                ra.scaled(la.constant)
            } else if ra.constant_only() {
                la.scaled(ra.constant)
            } else {
                return None;
            }
        }
        CExpr::Div(l, r) => {
            let ra = extract_affine(r, d, p)?;
            if ra.constant_only() && ra.constant != 0.0 {
                extract_affine(l, d, p)?.scaled(1.0 / ra.constant)
            } else {
                return None;
            }
        }
        CExpr::Pow(a, n) => {
            let aa = extract_affine(a, d, p)?;
            match n {
                0 => {
                    let mut one = Affine::zero(d, p);
                    one.constant = 1.0;
                    one
                }
                1 => aa,
                _ if aa.constant_only() => {
                    let mut c = Affine::zero(d, p);
                    c.constant = aa.constant.powi(*n as i32);
                    c
                }
                _ => return None,
            }
        }
    })
}

fn eval_dual(e: &CExpr, x: &[f64], lam: &[f64], wrt: Option<Slot>) -> Result<(f64, f64)> {
    Ok(match e {
        CExpr::Const(c) => (*c, 0.0),
        CExpr::Var(slot) => {
            let v = match slot {
                Slot::Decision(i) => x[*i],
                Slot::Random(j) => lam[*j],
            };
            (v, if wrt == Some(*slot) { 1.0 } else { 0.0 })
        }
        CExpr::Add(a, b) => {
            let (va, da) = eval_dual(a, x, lam, wrt)?;
            let (vb, db) = eval_dual(b, x, lam, wrt)?;
            (va + vb, da + db)
        }
        CExpr::Sub(a, b) => {
            let (va, da) = eval_dual(a, x, lam, wrt)?;
            let (vb, db) = eval_dual(b, x, lam, wrt)?;
            (va - vb, da - db)
        }
        CExpr::Mul(a, b) => {
            let (va, da) = eval_dual(a, x, lam, wrt)?;
            let (vb, db) = eval_dual(b, x, lam, wrt)?;
            (va * vb, da * vb + va * db)
        }
        CExpr::Div(a, b) => {
            let (va, da) = eval_dual(a, x, lam, wrt)?;
            let (vb, db) = eval_dual(b, x, lam, wrt)?;
            if vb == 0.0 {
                return Err(Error::Eval("division by zero".into()));
            }
            (va / vb, (da * vb - va * db) / (vb * vb))
        }
        CExpr::Neg(a) => {
            let (va, da) = eval_dual(a, x, lam, wrt)?;
            (-va, -da)
        }
        CExpr::Pow(a, n) => {
            let (va, da) = eval_dual(a, x, lam, wrt)?;
            if *n == 0 {
                (1.0, 0.0)
            } else {
                (va.powi(*n as i32), (*n as f64) * va.powi(*n as i32 - 1) * da)
            }
        }
    })
}

/// All expressions of a problem resolved at once, with the objective
/// normalized to minimization.
#[derive(Debug, Clone)]
pub(crate) struct CompiledProblem {
    pub d: usize,
    pub p: usize,
    pub objective: Compiled,
    pub inequalities: Vec<Compiled>,
    pub equalities: Vec<Compiled>,
}

pub(crate) fn compile_problem(prob: &StochasticProblem) -> Result<CompiledProblem> {
    let decisions = prob.decisions();
    let randoms: Vec<String> = prob.randoms().iter().map(|(n, _)| n.clone()).collect();
    let objective_expr = match prob.sense() {
        Sense::Minimize => prob.objective().clone(),
        Sense::Maximize => Expr::Neg(Box::new(prob.objective().clone())),
    };
    Ok(CompiledProblem {
        d: prob.d(),
        p: prob.p(),
        objective: Compiled::new(&objective_expr, decisions, &randoms)?,
        inequalities: prob
            .inequalities()
            .iter()
            .map(|g| Compiled::new(g, decisions, &randoms))
            .collect::<Result<_>>()?,
        equalities: prob
            .equalities()
            .iter()
            .map(|h| Compiled::new(h, decisions, &randoms))
            .collect::<Result<_>>()?,
    })
}
