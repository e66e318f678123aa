//! One-call pipelines tying the layers together: expansion solve → moments →
//! report, and Monte Carlo baseline → report. The command-line tool and the
//! acceptance tests share these paths.

use std::time::Instant;

use crate::diagnostics::interchange_gap_bound;
use crate::error::{Error, Result};
use crate::mc::{mc_solve, McRun};
use crate::orthopoly::Basis;
use crate::pce::{moments, MomentSummary};
use crate::problem::{Sense, StochasticProblem};
use crate::quadrature::{gauss_rule, QuadratureGrid};
use crate::report::{McReport, Method, PcReport, ProblemDigest, RunReport};
use crate::solver::{dual_gap, minimize_constrained, SolveOptions};
use crate::transform::{transform, ConstraintMode};

#[derive(Debug, Clone)]
pub struct PcSettings {
    pub order: usize,
    /// Nodes per random dimension; `None` means 2·order + 2.
    pub quad_points: Option<usize>,
    pub mode: ConstraintMode,
    /// Highest central moment to report.
    pub moments_k: usize,
    /// Attach an interchange-gap report.
    pub diagnostics: bool,
    pub opts: SolveOptions,
}

impl Default for PcSettings {
    fn default() -> Self {
        PcSettings {
            order: 2,
            quad_points: None,
            mode: ConstraintMode::Expectation,
            moments_k: 4,
            diagnostics: false,
            opts: SolveOptions::default(),
        }
    }
}

impl PcSettings {
    pub fn quad(&self) -> usize {
        self.quad_points.unwrap_or(2 * self.order + 2).max(1)
    }
}

fn tensor_grid(prob: &StochasticProblem, points: usize) -> Result<QuadratureGrid> {
    let rules = prob
        .families()
        .iter()
        .map(|&f| gauss_rule(f, points))
        .collect::<Result<Vec<_>>>()?;
    QuadratureGrid::tensor(&rules)
}

/// Solves the expansion reformulation from a decision-space start (higher
/// coefficients start at zero) and reports coefficients, moments, optimality
/// data and — when requested — the interchange-gap diagnostics.
pub fn solve_pc(
    prob: &StochasticProblem,
    start: &[f64],
    settings: &PcSettings,
) -> Result<RunReport> {
    let t0 = Instant::now();
    if start.len() != prob.d() {
        return Err(Error::Invalid(format!(
            "start point has {} entries but the problem has {} decision variables",
            start.len(),
            prob.d()
        )));
    }
    let quad = settings.quad();
    let basis = Basis::new(prob.families(), settings.order)?;
    let grid = tensor_grid(prob, quad)?;
    let det = transform(prob, basis, grid.clone(), settings.mode)?;

    let mut a0 = vec![0.0; det.dim()];
    for (i, &s) in start.iter().enumerate() {
        a0[i * det.terms()] = s;
    }
    let sol = minimize_constrained(&det, &a0, &settings.opts)?;

    let mut warnings = Vec::new();
    let constrained = det.num_inequalities() + det.num_equalities() > 0;
    let gap = if constrained {
        match dual_gap(&det, &sol) {
            Ok(g) => Some(g),
            Err(e) => {
                warnings.push(format!("dual gap unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };

    // Central moments integrate polynomials of degree moments_k·order, so the
    // moment rule may need more nodes than the solve used.
    let expansion = det.expansion(&sol.a_star)?;
    let moment_nodes = quad.max(settings.moments_k * settings.order / 2 + 1);
    let moment_grid = tensor_grid(prob, moment_nodes)?;
    let summary = moments(&expansion, &moment_grid, settings.moments_k)?;

    let diagnostics = if settings.diagnostics {
        Some(interchange_gap_bound(prob, &grid, start, &settings.opts)?)
    } else {
        None
    };

    let sign = match prob.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let terms = det.terms();
    let coefficients = (0..prob.d())
        .map(|i| sol.a_star[i * terms..(i + 1) * terms].to_vec())
        .collect();

    Ok(RunReport {
        problem: ProblemDigest::of(prob),
        method: Method::Pc,
        moments: summary,
        pc: Some(PcReport {
            families: prob.families(),
            order: settings.order,
            quadrature_nodes: quad,
            constraint_mode: settings.mode,
            coefficients,
            objective_value: sign * sol.objective_value,
            iterations: sol.iterations,
            converged: sol.converged,
            kkt: sol.kkt,
            dual_gap: gap,
        }),
        mc: None,
        aggregates: None,
        diagnostics,
        warnings,
        wall_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Runs the Monte Carlo baseline and reports its statistics. The raw run is
/// returned alongside the report for CSV export and aggregate computations.
pub fn run_mc(
    prob: &StochasticProblem,
    samples: usize,
    seed: u64,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<(RunReport, McRun)> {
    let t0 = Instant::now();
    let run = mc_solve(prob, samples, seed, start, opts)?;
    let report = RunReport {
        problem: ProblemDigest::of(prob),
        method: Method::Mc,
        moments: MomentSummary {
            mean: run.stats.mean.clone(),
            std: run.stats.std.clone(),
            central_moments: None,
        },
        pc: None,
        mc: Some(McReport {
            samples,
            seed,
            excluded: run.stats.excluded,
            start: start.to_vec(),
            min: run.stats.min.clone(),
            max: run.stats.max.clone(),
            standard_error: run.stats.standard_error.clone(),
        }),
        aggregates: None,
        diagnostics: None,
        warnings: Vec::new(),
        wall_seconds: t0.elapsed().as_secs_f64(),
    };
    Ok((report, run))
}

/// Aligned PC vs MC table over decision variables: means, stds, and the
/// difference of means (absolute and relative to the MC value).
pub fn compare_text(pc: &RunReport, mc: &RunReport) -> String {
    let names = &pc.problem.decision;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>14} {:>14} {:>11} {:>9} {:>11} {:>11}\n",
        "variable", "pc mean", "mc mean", "Δmean", "rel %", "pc std", "mc std"
    ));
    for (i, name) in names.iter().enumerate() {
        let pm = pc.moments.mean[i];
        let mm = mc.moments.mean[i];
        let diff = pm - mm;
        let rel = 100.0 * diff.abs() / mm.abs().max(1e-12);
        out.push_str(&format!(
            "{:<12} {:>14.6} {:>14.6} {:>11.2e} {:>9.3} {:>11.6} {:>11.6}\n",
            name, pm, mm, diff, rel, pc.moments.std[i], mc.moments.std[i]
        ));
    }
    out
}
