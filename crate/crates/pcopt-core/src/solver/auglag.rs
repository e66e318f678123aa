//! Constrained minimization by the classic augmented-Lagrangian loop:
//! inner quasi-Newton solves of
//!   Φ(x) = F + Σᵢ [max(0, uᵢ + ρGᵢ)² − uᵢ²]/(2ρ) + Σⱼ vⱼHⱼ + (ρ/2)ΣⱼHⱼ²,
//! multiplier updates u ← max(0, u + ρG), v ← v + ρH, and penalty growth
//! whenever feasibility fails to shrink by 4×.

use crate::error::Result;
use crate::solver::bfgs::minimize_to;
use crate::solver::{kkt_residual, minimize_unconstrained, norm2, ConstrainedProblem, SolveOptions, SolveResult};

pub fn minimize_constrained<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let n = problem.dim();
    let m = problem.num_inequalities();
    let me = problem.num_equalities();
    if m + me == 0 {
        return minimize_unconstrained(|x: &[f64], g: &mut [f64]| problem.objective_grad(x, g), x0, opts);
    }

    // Stationarity target is relative to the plain objective gradient at the
    // start, mirroring the unconstrained convergence test.
    let mut scratch = vec![0.0; n];
    problem.objective_grad(x0, &mut scratch)?;
    let target_stat = opts.grad_tol * (1.0 + norm2(&scratch));

    let mut x = x0.to_vec();
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; me];
    let mut rho = opts.penalty_init;
    let mut prev_feas = f64::INFINITY;
    let mut total_iterations = 0;

    let mut best: Option<SolveResult> = None;

    for outer in 0..opts.al_outer_iters {
        let inner_target = target_stat.max(1e-2 * 0.1_f64.powi(outer as i32));
        let (u_k, v_k, rho_k) = (u.clone(), v.clone(), rho);
        let mut row = vec![0.0; n];
        let phi = |xx: &[f64], grad: &mut [f64]| -> Result<f64> {
            let mut val = problem.objective_grad(xx, grad)?;
            for (i, &ui) in u_k.iter().enumerate() {
                let g = problem.inequality_grad(i, xx, &mut row)?;
                let shifted = (ui + rho_k * g).max(0.0);
                val += (shifted * shifted - ui * ui) / (2.0 * rho_k);
                if shifted != 0.0 {
                    for (t, r) in grad.iter_mut().zip(&row) {
                        *t += shifted * r;
                    }
                }
            }
            for (j, &vj) in v_k.iter().enumerate() {
                let h = problem.equality_grad(j, xx, &mut row)?;
                val += vj * h + 0.5 * rho_k * h * h;
                let w = vj + rho_k * h;
                for (t, r) in grad.iter_mut().zip(&row) {
                    *t += w * r;
                }
            }
            Ok(val)
        };
        let inner = minimize_to(phi, &x, opts, Some(inner_target))?;
        total_iterations += inner.iterations;
        x = inner.a_star;

        // First-order multiplier updates at the inner solution.
        let mut feas = 0.0_f64;
        for (i, ui) in u.iter_mut().enumerate() {
            let g = problem.inequality(i, &x)?;
            *ui = (*ui + rho * g).max(0.0);
            feas = feas.max(g.max(0.0));
        }
        for (j, vj) in v.iter_mut().enumerate() {
            let h = problem.equality(j, &x)?;
            *vj += rho * h;
            feas = feas.max(h.abs());
        }

        let kkt = kkt_residual(problem, &x, &u, &v)?;
        let candidate = SolveResult {
            a_star: x.clone(),
            u: u.clone(),
            v: v.clone(),
            objective_value: problem.objective(&x)?,
            kkt,
            iterations: total_iterations,
            converged: kkt.feasibility <= opts.feas_tol && kkt.stationarity <= target_stat,
        };
        if candidate.converged {
            return Ok(candidate);
        }
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.kkt.feasibility < b.kkt.feasibility
                    || (candidate.kkt.feasibility <= b.kkt.feasibility
                        && candidate.objective_value < b.objective_value)
            }
        };
        if better {
            best = Some(candidate);
        }

        if feas > 0.25 * prev_feas && feas > opts.feas_tol {
            rho *= opts.penalty_growth;
        }
        prev_feas = feas;
    }

    let mut result = best.expect("at least one outer iteration");
    result.iterations = total_iterations;
    result.converged = false;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::StochasticProblem;
    use crate::solver::dual_gap;
    use crate::transform::{transform_with, ConstraintMode, DeterministicProblem};

    fn toy(text: &str, order: usize, n: usize) -> DeterministicProblem {
        let prob = StochasticProblem::parse(text).unwrap();
        transform_with(&prob, order, n, ConstraintMode::Expectation).unwrap()
    }

    #[test]
    fn active_inequality_recovers_analytic_multiplier() {
        // min x² s.t. 1 − x ≤ 0 has x* = 1, u* = 2.
        let dp = toy(
            "[decision]\nx\n[random]\nw ~ normal(0.0, 1.0)\n[objective]\nminimize x^2\n[constraints]\n1 - x <= 0\n",
            0,
            1,
        );
        let res = minimize_constrained(&dp, &[3.0], &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.a_star[0] - 1.0).abs() < 1e-4, "x = {}", res.a_star[0]);
        assert!((res.u[0] - 2.0).abs() < 1e-4, "u = {}", res.u[0]);
        assert!(res.kkt.complementarity < 1e-6);
        assert!(res.kkt.dual_sign == 0.0);
    }

    #[test]
    fn equality_recovers_analytic_multiplier() {
        // min x² + y² s.t. x + y = 1 has (0.5, 0.5), v* = −1.
        let dp = toy(
            "[decision]\nx, y\n[random]\nw ~ normal(0.0, 1.0)\n[objective]\nminimize x^2 + y^2\n[constraints]\nx + y - 1 == 0\n",
            0,
            1,
        );
        let res = minimize_constrained(&dp, &[0.0, 0.0], &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.a_star[0] - 0.5).abs() < 1e-4);
        assert!((res.a_star[1] - 0.5).abs() < 1e-4);
        assert!((res.v[0] + 1.0).abs() < 1e-4, "v = {}", res.v[0]);
        assert!(res.kkt.complementarity < 1e-6);

        let gap = dual_gap(&dp, &res).unwrap();
        assert!(gap.abs() < 1e-6, "gap = {gap}");
    }

    #[test]
    fn weak_duality_holds_on_nonconvex_instance() {
        let dp = toy(
            "[decision]\nx1, x2\n[random]\nlambda ~ normal(0.0, 1.0)\n[objective]\nminimize (x1^2 + x2 - 11 + 2*lambda)^2 + (x1 + x2^2 - 7)^2\n[constraints]\nx1 - 10 <= 0\n",
            1,
            3,
        );
        let res = minimize_constrained(&dp, &[3.0, 0.0, 3.0, 0.0], &SolveOptions::default()).unwrap();
        assert!(res.converged);
        let gap = dual_gap(&dp, &res).unwrap();
        assert!(gap >= -1e-8, "gap = {gap}");
    }

    #[test]
    fn infeasible_problem_reports_failure_with_best_iterate() {
        let dp = toy(
            "[decision]\nx\n[random]\nw ~ normal(0.0, 1.0)\n[objective]\nminimize x^2\n[constraints]\n1 - x <= 0\nx + 1 <= 0\n",
            0,
            1,
        );
        let res = minimize_constrained(&dp, &[0.0], &SolveOptions::default()).unwrap();
        assert!(!res.converged);
        // Both constraints cannot hold; the best iterate splits the violation.
        assert!(res.kkt.feasibility > 0.5);
        assert!(res.a_star[0].abs() < 0.6);
    }

    #[test]
    fn no_constraints_falls_back_to_quasi_newton() {
        let dp = toy(
            "[decision]\nx\n[random]\nw ~ normal(0.0, 1.0)\n[objective]\nminimize x^2 + x\n",
            0,
            1,
        );
        let res = minimize_constrained(&dp, &[2.0], &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.a_star[0] + 0.5).abs() < 1e-6);
        assert!(res.u.is_empty() && res.v.is_empty());
    }
}
