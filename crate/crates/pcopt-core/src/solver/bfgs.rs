//! Quasi-Newton minimizer: dense inverse-Hessian BFGS updates with a
//! backtracking Armijo line search.

use crate::error::{Error, Result};
use crate::solver::{norm2, KKTReport, SolveOptions, SolveResult};

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Curvature threshold: updates with sᵀy below this multiple of ‖s‖‖y‖ are
/// skipped to keep the inverse Hessian positive definite.
const CURVATURE_TOL: f64 = 1e-10;

/// Minimizes a smooth function from `x0`. The callback evaluates the function
/// and writes its gradient into the second argument. Convergence is declared
/// when ‖g‖ ≤ grad_tol·(1 + ‖g(x0)‖); hitting the iteration cap returns
/// `converged = false` rather than an error.
pub fn minimize_unconstrained<F>(f: F, x0: &[f64], opts: &SolveOptions) -> Result<SolveResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    minimize_to(f, x0, opts, None)
}

/// As `minimize_unconstrained`, but with an optional absolute stationarity
/// target overriding the relative test (used by the outer constrained loop to
/// tighten inner solves on its own schedule).
pub(crate) fn minimize_to<F>(
    mut f: F,
    x0: &[f64],
    opts: &SolveOptions,
    stat_target: Option<f64>,
) -> Result<SolveResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    opts.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::Invalid("cannot minimize over zero variables".into()));
    }

    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut fx = f(&x, &mut grad)?;
    if !fx.is_finite() || !norm2(&grad).is_finite() {
        return Err(Error::Numerical(format!(
            "objective or gradient non-finite at the initial point (f = {fx})"
        )));
    }
    let tol = match stat_target {
        Some(abs) => abs,
        None => opts.grad_tol * (1.0 + norm2(&grad)),
    };

    // Inverse-Hessian approximation, dense row-major. Rescaled to
    // (sᵀy/yᵀy)·I after the first accepted step.
    let mut h = identity(n);
    let mut p = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut x_alt = vec![0.0; n];
    let mut g_alt = vec![0.0; n];
    let mut hy = vec![0.0; n];

    let mut iterations = 0;
    let mut converged = norm2(&grad) <= tol;

    while !converged && iterations < opts.max_iters {
        mat_vec(&h, &grad, &mut p);
        for v in p.iter_mut() {
            *v = -*v;
        }
        let mut gp: f64 = grad.iter().zip(&p).map(|(g, d)| g * d).sum();
        if !(gp < 0.0) {
            // Numerical breakdown of positive definiteness: restart steepest.
            h = identity(n);
            for (d, g) in p.iter_mut().zip(&grad) {
                *d = -g;
            }
            gp = -grad.iter().map(|g| g * g).sum::<f64>();
            if gp == 0.0 {
                converged = true;
                break;
            }
        }

        // Backtracking Armijo: accept f(x + t p) ≤ f(x) + c₁ t gᵀp. On the
        // first iteration H is untuned and p is the raw gradient, whose trial
        // point can land in a different basin on steep functions; cap that
        // step to unit length and let the interpolation below extend it.
        let mut t = if iterations == 0 {
            let pn = norm2(&p);
            if pn > 1.0 {
                1.0 / pn
            } else {
                1.0
            }
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((xt, xi), pi) in x_trial.iter_mut().zip(&x).zip(&p) {
                *xt = xi + t * pi;
            }
            let ft = f(&x_trial, &mut g_trial)?;
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * t * gp && norm2(&g_trial).is_finite() {
                accepted = Some(ft);
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        let Some(mut ft) = accepted else {
            // Step collapsed below resolution; report the best point honestly.
            break;
        };

        // One quadratic-interpolation refinement through φ(0), φ′(0), φ(t).
        // On quadratic objectives this is the exact minimizer along p, which
        // restores the conjugate-direction finite-termination property.
        let denom = ft - fx - t * gp;
        if denom > 0.0 {
            let tq = -gp * t * t / (2.0 * denom);
            if tq.is_finite() && tq > 0.0 && (tq - t).abs() > 0.1 * t && tq <= 100.0 * t {
                for ((xt, xi), pi) in x_alt.iter_mut().zip(&x).zip(&p) {
                    *xt = xi + tq * pi;
                }
                let fq = f(&x_alt, &mut g_alt)?;
                if fq.is_finite()
                    && fq <= fx + ARMIJO_C1 * tq * gp
                    && fq < ft
                    && norm2(&g_alt).is_finite()
                {
                    t = tq;
                    ft = fq;
                    x_trial.copy_from_slice(&x_alt);
                    g_trial.copy_from_slice(&g_alt);
                }
            }
        }
        debug_assert!(ft <= fx, "line search accepted an increase");

        let s: Vec<f64> = p.iter().map(|pi| t * pi).collect();
        let y: Vec<f64> = g_trial.iter().zip(&grad).map(|(gn, go)| gn - go).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let curvature_ok = sy > CURVATURE_TOL * norm2(&s) * norm2(&y);

        if curvature_ok {
            if iterations == 0 {
                let yy: f64 = y.iter().map(|v| v * v).sum();
                if yy > 0.0 {
                    let scale = sy / yy;
                    h = identity(n);
                    for i in 0..n {
                        h[i * n + i] = scale;
                    }
                }
            }
            bfgs_update(&mut h, &s, &y, sy, &mut hy);
        }

        x.copy_from_slice(&x_trial);
        grad.copy_from_slice(&g_trial);
        fx = ft;
        iterations += 1;
        converged = norm2(&grad) <= tol;
    }

    Ok(SolveResult {
        a_star: x,
        u: Vec::new(),
        v: Vec::new(),
        objective_value: fx,
        kkt: KKTReport::unconstrained(norm2(&grad)),
        iterations,
        converged,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ with ρ = 1/sᵀy, expanded so only the
/// intermediate Hy is materialized.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, hy: &mut [f64]) {
    let n = s.len();
    let rho = 1.0 / sy;
    mat_vec(h, y, hy);
    let yhy: f64 = y.iter().zip(hy.iter()).map(|(a, b)| a * b).sum();
    let c = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += c * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}
