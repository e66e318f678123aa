//! Second-order character of stationary points of a one-dimensional
//! equality-constrained Lagrangian L(x) = f(x) + v·h(x), read off the
//! bordered matrix J = [[L″, h′], [h′, 0]]. Because det J = −(h′)², any
//! genuinely constrained stationary point is a saddle of the Lagrangian.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{grad_expr, Expr};

const STATIONARITY_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryKind {
    Minimum,
    Maximum,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Copy)]
pub struct Classification {
    pub kind: StationaryKind,
    /// Eigenvalues of the bordered matrix, descending.
    pub eigenvalues: [f64; 2],
    /// h′ at the point; zero means the constraint is locally trivial.
    pub grad_h: f64,
}

/// Classifies a stationary point of f + v·h in a single variable. First
/// derivatives are symbolic; the second derivative in J is a central finite
/// difference of the symbolic first derivative. The point must satisfy
/// |f′ + v·h′| ≤ 1e−6 or an error is returned.
pub fn classify_stationary_point(f: &Expr, h: &Expr, x: f64, v: f64) -> Result<Classification> {
    let mut vars: Vec<&str> = f.variables().into_iter().collect();
    for name in h.variables() {
        if !vars.contains(&name) {
            vars.push(name);
        }
    }
    if vars.len() != 1 {
        return Err(Error::Invalid(format!(
            "classification needs exactly one variable, found {:?}",
            vars
        )));
    }
    let name = vars[0];

    let lagr_prime = |t: f64| -> Result<f64> {
        let env: HashMap<String, f64> = [(name.to_string(), t)].into();
        Ok(grad_expr(f, name, &env)? + v * grad_expr(h, name, &env)?)
    };

    let slope = lagr_prime(x)?;
    if slope.abs() > STATIONARITY_TOL {
        return Err(Error::Invalid(format!(
            "point is not stationary: |f' + v h'| = {:.3e}",
            slope.abs()
        )));
    }

    let lagr_second = (lagr_prime(x + FD_STEP)? - lagr_prime(x - FD_STEP)?) / (2.0 * FD_STEP);
    let env: HashMap<String, f64> = [(name.to_string(), x)].into();
    let grad_h = grad_expr(h, name, &env)?;

    // Symmetric 2×2 eigenvalues of [[L″, h′], [h′, 0]].
    let tr = lagr_second;
    let disc = (tr * tr + 4.0 * grad_h * grad_h).sqrt();
    let eigenvalues = [(tr + disc) / 2.0, (tr - disc) / 2.0];
    let product = eigenvalues[0] * eigenvalues[1];

    let kind = if product < -EIGEN_TOL {
        StationaryKind::Saddle
    } else if grad_h.abs() < EIGEN_TOL {
        StationaryKind::Degenerate
    } else if eigenvalues[0] > EIGEN_TOL && eigenvalues[1] > EIGEN_TOL {
        StationaryKind::Minimum
    } else if eigenvalues[0] < -EIGEN_TOL && eigenvalues[1] < -EIGEN_TOL {
        StationaryKind::Maximum
    } else {
        StationaryKind::Degenerate
    };

    Ok(Classification {
        kind,
        eigenvalues,
        grad_h,
    })
}
