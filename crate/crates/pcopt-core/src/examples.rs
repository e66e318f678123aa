//! Built-in demonstration problems with their reference settings: an
//! uncertain quadratic, the Himmelblau function with a noisy valley, and a
//! task-scheduling linear program with a random load threshold. Each carries
//! the basis order, quadrature size, constraint mode, start points and sample
//! count it is meant to run with, so the command line and the tests exercise
//! identical instances.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::mc::McRun;
use crate::problem::{parse_problem, StochasticProblem};
use crate::report::{AggregateStat, RunReport};
use crate::run::PcSettings;
use crate::transform::ConstraintMode;

/// A named weighted sum of the decision variables, reported as an extra
/// statistic (e.g. "percent of tasks completed").
#[derive(Debug, Clone)]
pub struct AggregateDef {
    pub name: String,
    pub weights: Vec<f64>,
}

pub struct Example {
    pub name: &'static str,
    /// Problem source text; parsing it yields `problem`.
    pub text: String,
    pub problem: StochasticProblem,
    /// One start per equilibrium of interest.
    pub starts: Vec<Vec<f64>>,
    pub settings: PcSettings,
    pub aggregates: Vec<AggregateDef>,
    /// Baseline sample count the reference numbers were computed with.
    pub mc_samples: usize,
}

pub fn by_name(name: &str) -> Result<Example> {
    match name {
        "quadratic" => quadratic(),
        "himmelblau" => himmelblau(),
        "scheduling" => scheduling(),
        other => Err(Error::Invalid(format!(
            "unknown example `{other}` (expected quadratic, himmelblau, or scheduling)"
        ))),
    }
}

/// One-dimensional quadratic with an uncertain curvature: the optimum is
/// x*(λ) = -1/(2(1+λ)), a smooth non-polynomial function of the noise.
pub fn quadratic() -> Result<Example> {
    let text = "\
[decision]
x
[random]
lambda ~ normal(0.0, 0.1)
[objective]
minimize (1 + lambda)*x^2 + x
";
    let problem = parse_problem(text)?;
    Ok(Example {
        name: "quadratic",
        text: text.to_string(),
        problem,
        starts: vec![vec![0.0]],
        settings: PcSettings {
            order: 2,
            ..PcSettings::default()
        },
        aggregates: Vec::new(),
        mc_samples: 1000,
    })
}

/// Himmelblau's function with noise shifted into the first valley term. The
/// four deterministic minima each keep a basin; `starts` holds one point per
/// basin, in the table order (3,2), (-2.81,3.13), (-3.78,-3.28), (3.58,-1.85).
pub fn himmelblau() -> Result<Example> {
    let text = "\
[decision]
x1
x2
[random]
lambda ~ normal(0.0, 1.0)
[objective]
minimize (x1^2 + x2 - 11 + 2*lambda)^2 + (x1 + x2^2 - 7)^2
";
    let problem = parse_problem(text)?;
    Ok(Example {
        name: "himmelblau",
        text: text.to_string(),
        problem,
        starts: vec![
            vec![3.0, 3.0],
            vec![-3.0, 3.0],
            vec![-3.0, -3.0],
            vec![3.0, -2.0],
        ],
        settings: PcSettings {
            order: 1,
            ..PcSettings::default()
        },
        aggregates: Vec::new(),
        mc_samples: 1000,
    })
}

const SCHED_REAL: usize = 3; // tasks with reward 1 and load +3
const SCHED_REST: usize = 3; // rest tasks with reward 1 and load -1
const SCHED_SLOTS: usize = 10;

/// Task scheduling over ten slots: three unit-reward tasks each add 3 to the
/// operator load, three "rest" tasks each remove 1, and every slot's net load
/// is capped by a threshold β ~ Normal(1, 0.2). The same threshold bounds how
/// much rest is available. Fractions x_ij of task i run in slot j; the
/// schedule maximizes total assigned work. Aggregates report percent of real
/// tasks completed and percent of rest used.
pub fn scheduling() -> Result<Example> {
    let tasks = SCHED_REAL + SCHED_REST;
    let name = |i: usize, j: usize| format!("x{}_{}", i + 1, j + 1);

    let mut text = String::from("[decision]\n");
    for i in 0..tasks {
        for j in 0..SCHED_SLOTS {
            writeln!(text, "{}", name(i, j)).unwrap();
        }
    }
    text.push_str("[random]\nbeta ~ normal(1.0, 0.2)\n[objective]\nmaximize ");
    let all: Vec<String> = (0..tasks)
        .flat_map(|i| (0..SCHED_SLOTS).map(move |j| name(i, j)))
        .collect();
    writeln!(text, "{}", all.join(" + ")).unwrap();

    text.push_str("[constraints]\n");
    // Each task is at most fully assigned; rest is additionally capped by the
    // (random) threshold.
    for i in 0..tasks {
        let total: Vec<String> = (0..SCHED_SLOTS).map(|j| name(i, j)).collect();
        writeln!(text, "{} <= 1", total.join(" + ")).unwrap();
        if i >= SCHED_REAL {
            writeln!(text, "{} <= beta", total.join(" + ")).unwrap();
        }
    }
    // Net operator load per slot stays under the threshold.
    for j in 0..SCHED_SLOTS {
        let load: Vec<String> = (0..SCHED_REAL).map(|i| format!("3*{}", name(i, j))).collect();
        let relief: Vec<String> = (SCHED_REAL..tasks).map(|i| name(i, j)).collect();
        writeln!(text, "{} - {} <= beta", load.join(" + "), relief.join(" - ")).unwrap();
    }
    for i in 0..tasks {
        for j in 0..SCHED_SLOTS {
            writeln!(text, "{} >= 0", name(i, j)).unwrap();
        }
    }

    let problem = parse_problem(&text)?;
    let dim = tasks * SCHED_SLOTS;
    let real_dims = SCHED_REAL * SCHED_SLOTS;
    let pct = 100.0 / SCHED_REAL as f64;
    let completion: Vec<f64> = (0..dim)
        .map(|k| if k < real_dims { pct } else { 0.0 })
        .collect();
    let rest: Vec<f64> = (0..dim)
        .map(|k| if k < real_dims { 0.0 } else { pct })
        .collect();

    Ok(Example {
        name: "scheduling",
        text,
        problem,
        starts: vec![vec![0.0; dim]],
        settings: PcSettings {
            order: 1,
            quad_points: Some(4),
            mode: ConstraintMode::Collocation,
            ..PcSettings::default()
        },
        aggregates: vec![
            AggregateDef {
                name: "completion_pct".into(),
                weights: completion,
            },
            AggregateDef {
                name: "rest_pct".into(),
                weights: rest,
            },
        ],
        mc_samples: 1000,
    })
}

/// Statistics of weighted sums from an expansion report: a linear combination
/// of expansions is an expansion with combined coefficients, so its mean is
/// the combined constant term and its variance the sum of squared higher ones.
pub fn pc_aggregates(report: &RunReport, defs: &[AggregateDef]) -> Result<Vec<AggregateStat>> {
    let pc = report
        .pc
        .as_ref()
        .ok_or_else(|| Error::Invalid("report carries no expansion block".into()))?;
    let d = pc.coefficients.len();
    let terms = pc.coefficients.first().map_or(0, Vec::len);
    defs.iter()
        .map(|def| {
            if def.weights.len() != d {
                return Err(Error::Invalid(format!(
                    "aggregate `{}` has {} weights for {} variables",
                    def.name,
                    def.weights.len(),
                    d
                )));
            }
            let mut combined = vec![0.0; terms];
            for (w, row) in def.weights.iter().zip(&pc.coefficients) {
                for (c, a) in combined.iter_mut().zip(row) {
                    *c += w * a;
                }
            }
            let std = combined[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
            Ok(AggregateStat {
                name: def.name.clone(),
                mean: combined[0],
                std,
            })
        })
        .collect()
}

/// Statistics of weighted sums over the converged baseline samples.
pub fn mc_aggregates(run: &McRun, defs: &[AggregateDef]) -> Result<Vec<AggregateStat>> {
    let kept: Vec<&Vec<f64>> = run
        .samples
        .iter()
        .filter(|s| s.converged)
        .map(|s| &s.x)
        .collect();
    if kept.len() < 2 {
        return Err(Error::Invalid(
            "aggregate statistics need at least 2 converged samples".into(),
        ));
    }
    defs.iter()
        .map(|def| {
            if def.weights.len() != run.stats.mean.len() {
                return Err(Error::Invalid(format!(
                    "aggregate `{}` has {} weights for {} variables",
                    def.name,
                    def.weights.len(),
                    run.stats.mean.len()
                )));
            }
            let sums: Vec<f64> = kept
                .iter()
                .map(|x| x.iter().zip(&def.weights).map(|(a, w)| a * w).sum())
                .collect();
            let n = sums.len() as f64;
            let mean = sums.iter().sum::<f64>() / n;
            let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(AggregateStat {
                name: def.name.clone(),
                mean,
                std: var.sqrt(),
            })
        })
        .collect()
}

/// Cost-surface samples of the noise-free Himmelblau function on an n×n
/// uniform grid over [-5, 5]², as `x1,x2,f` CSV rows.
pub fn himmelblau_grid_csv(n: usize) -> String {
    let f = |x1: f64, x2: f64| {
        (x1 * x1 + x2 - 11.0).powi(2) + (x1 + x2 * x2 - 7.0).powi(2)
    };
    let coord = |k: usize| -5.0 + 10.0 * k as f64 / (n - 1).max(1) as f64;
    let mut out = String::from("x1,x2,f\n");
    for i in 0..n {
        for j in 0..n {
            let (x1, x2) = (coord(i), coord(j));
            writeln!(out, "{},{},{}", x1, x2, f(x1, x2)).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{mc_solve, solve_fixed};
    use crate::run::{run_mc, solve_pc};
    use crate::solver::SolveOptions;

    #[test]
    fn quadratic_example_matches_its_reference_statistics() {
        let ex = quadratic().unwrap();
        let report = solve_pc(&ex.problem, &ex.starts[0], &ex.settings).unwrap();
        assert!((report.moments.mean[0] - (-0.505)).abs() < 0.01);
        assert!((report.moments.std[0] - 0.054).abs() < 0.01);
    }

    #[test]
    fn himmelblau_deterministic_minima_sit_where_expected() {
        let ex = himmelblau().unwrap();
        let expect = [
            [3.0, 2.0],
            [-2.805118, 3.131313],
            [-3.779310, -3.283186],
            [3.584428, -1.848127],
        ];
        for (start, want) in ex.starts.iter().zip(expect) {
            let sol = solve_fixed(&ex.problem, &[0.0], start, &SolveOptions::default()).unwrap();
            assert!(sol.converged);
            for (got, want) in sol.a_star.iter().zip(want) {
                assert!((got - want).abs() < 1e-5, "{:?} vs {want}", sol.a_star);
            }
        }
    }

    #[test]
    fn himmelblau_first_equilibrium_statistics() {
        let ex = himmelblau().unwrap();
        // Expansion solve from the first basin.
        let report = solve_pc(&ex.problem, &ex.starts[0], &ex.settings).unwrap();
        let pc = report.pc.as_ref().unwrap();
        assert!(pc.converged);
        // First-order optimum of the exact expected cost from this basin.
        assert!((report.moments.mean[0] - 2.9802).abs() < 1e-3, "{:?}", report.moments.mean);
        assert!((report.moments.mean[1] - 2.0030).abs() < 1e-3, "{:?}", report.moments.mean);
        assert!((report.moments.std[0] - 0.3448).abs() < 1e-3, "{:?}", report.moments.std);
        assert!((report.moments.std[1] - 0.0841).abs() < 1e-3, "{:?}", report.moments.std);
        // Baseline from the same basin lands on the same statistics.
        let run = mc_solve(&ex.problem, 400, 0, &ex.starts[0], &SolveOptions::default()).unwrap();
        assert!((run.stats.mean[0] - report.moments.mean[0]).abs() < 0.06, "{:?}", run.stats.mean);
        assert!((run.stats.mean[1] - report.moments.mean[1]).abs() < 0.06, "{:?}", run.stats.mean);
        assert!((run.stats.std[0] - report.moments.std[0]).abs() < 0.1, "{:?}", run.stats.std);
    }

    #[test]
    fn grid_csv_covers_the_square_and_hits_a_minimum() {
        let csv = himmelblau_grid_csv(11);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,x2,f"));
        assert_eq!(csv.lines().count(), 1 + 11 * 11);
        // The grid contains (3, 2) where the cost vanishes.
        assert!(csv.lines().any(|l| l.starts_with("3,2,0")));
        assert!(csv.contains("-5,-5,"));
        assert!(csv.contains("5,5,"));
    }

    #[test]
    fn scheduling_monte_carlo_matches_the_closed_form() {
        let ex = scheduling().unwrap();
        assert_eq!(ex.problem.d(), 60);
        assert_eq!(ex.problem.num_inequalities(), 79);
        let opts = SolveOptions::default();
        let (report, run) = run_mc(&ex.problem, 60, 7, &ex.starts[0], &opts).unwrap();
        assert_eq!(report.mc.as_ref().unwrap().excluded, 0);
        let stats = mc_aggregates(&run, &ex.aggregates).unwrap();
        // Per sample the optimum splits into rest S* = 3·min(1, β) and work
        // T* = min(3, (10β + S*)/3); check each sample against that.
        for s in &run.samples {
            let beta = s.lambda[0];
            let s_star = 3.0 * beta.min(1.0);
            let t_star = ((10.0 * beta + s_star) / 3.0).min(3.0);
            let work: f64 = s.x[..30].iter().sum();
            let rest: f64 = s.x[30..].iter().sum();
            assert!((work - t_star).abs() < 2e-3, "beta={beta}: {work} vs {t_star}");
            assert!((rest - s_star).abs() < 2e-3, "beta={beta}: {rest} vs {s_star}");
        }
        assert_eq!(stats[0].name, "completion_pct");
        assert!((stats[0].mean - 99.2).abs() < 2.0, "{}", stats[0].mean);
        assert!((stats[1].mean - 92.0).abs() < 3.0, "{}", stats[1].mean);
    }

    #[test]
    fn scheduling_expansion_respects_every_node() {
        let ex = scheduling().unwrap();
        let report = solve_pc(&ex.problem, &ex.starts[0], &ex.settings).unwrap();
        let pc = report.pc.as_ref().unwrap();
        assert!(pc.converged, "kkt {:?}", pc.kkt);
        let stats = pc_aggregates(&report, &ex.aggregates).unwrap();
        // Affine-in-noise schedules must stay feasible at the widest
        // collocation node, which caps how much work the expansion can claim.
        assert!(stats[0].mean > 80.0 && stats[0].mean < 101.0, "{}", stats[0].mean);
        assert!(stats[0].std > 0.0, "{}", stats[0].std);
        // Completion never exceeds 100% at any quadrature node.
        let rule = crate::quadrature::gauss_rule(
            crate::orthopoly::PolynomialFamily::Hermite,
            4,
        )
        .unwrap();
        for &node in &rule.nodes {
            let total: f64 = pc.coefficients[..30]
                .iter()
                .map(|row| row[0] + row[1] * node)
                .sum();
            assert!(total <= 3.0 + 1e-5, "node {node}: {total}");
        }
    }

    #[test]
    fn aggregates_validate_their_weight_lengths() {
        let ex = quadratic().unwrap();
        let report = solve_pc(&ex.problem, &ex.starts[0], &ex.settings).unwrap();
        let bad = [AggregateDef {
            name: "broken".into(),
            weights: vec![1.0, 2.0],
        }];
        assert!(pc_aggregates(&report, &bad).is_err());
        assert!(by_name("nope").is_err());
        assert_eq!(by_name("scheduling").unwrap().name, "scheduling");
    }
}
