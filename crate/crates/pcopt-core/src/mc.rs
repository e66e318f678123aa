//! Monte Carlo baseline: draw the random parameters, solve the resulting
//! deterministic problem per sample, and report statistics of the per-sample
//! optima. This is the reference the chaos-expansion results are validated
//! against.
//!
//! Reproducibility is part of the contract. Sample `s` reads stream `s` of a
//! counter-based generator seeded once, so the draw for a sample does not
//! depend on how many threads ran before it, and statistics are reduced
//! sequentially in sample order — reruns are bitwise identical for a fixed
//! seed regardless of parallelism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compile::{compile_problem, CompiledProblem};
use crate::error::{Error, Result};
use crate::orthopoly::PolynomialFamily;
use crate::problem::{Sense, StochasticProblem};
use crate::solver::{minimize_constrained, ConstrainedProblem, SolveOptions, SolveResult};

/// Standard normal draw via Box–Muller. The first uniform is flipped into
/// (0, 1] so the logarithm stays finite.
pub fn normal_draw<R: Rng>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform draw on [-1, 1].
pub fn uniform_draw<R: Rng>(rng: &mut R) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

/// One joint draw of a problem's random parameters, in declaration order.
pub fn sample_randoms(prob: &StochasticProblem, seed: u64, index: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    prob.randoms()
        .iter()
        .map(|(_, dist)| {
            let xi = match dist.family() {
                PolynomialFamily::Hermite => normal_draw(&mut rng),
                PolynomialFamily::Legendre => uniform_draw(&mut rng),
            };
            dist.standardize(xi)
        })
        .collect()
}

/// A compiled problem with its random parameters pinned at one draw.
pub(crate) struct FixedLambda<'a> {
    pub compiled: &'a CompiledProblem,
    pub lam: Vec<f64>,
}

impl ConstrainedProblem for FixedLambda<'_> {
    fn dim(&self) -> usize {
        self.compiled.d
    }
    fn objective(&self, x: &[f64]) -> Result<f64> {
        self.compiled.objective.eval(x, &self.lam)
    }
    fn objective_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.compiled.objective.eval_grad_x(x, &self.lam, grad)
    }
    fn num_inequalities(&self) -> usize {
        self.compiled.inequalities.len()
    }
    fn num_equalities(&self) -> usize {
        self.compiled.equalities.len()
    }
    fn inequality(&self, idx: usize, x: &[f64]) -> Result<f64> {
        self.compiled.inequalities[idx].eval(x, &self.lam)
    }
    fn inequality_grad(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.compiled.inequalities[idx].eval_grad_x(x, &self.lam, grad)
    }
    fn equality(&self, idx: usize, x: &[f64]) -> Result<f64> {
        self.compiled.equalities[idx].eval(x, &self.lam)
    }
    fn equality_grad(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.compiled.equalities[idx].eval_grad_x(x, &self.lam, grad)
    }
}

/// Solves the problem at one fixed realization of its random parameters.
/// The returned objective value is in the problem's original sense.
pub fn solve_fixed(
    prob: &StochasticProblem,
    lam: &[f64],
    start: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    if lam.len() != prob.p() {
        return Err(Error::Invalid(format!(
            "expected {} random values, got {}",
            prob.p(),
            lam.len()
        )));
    }
    if start.len() != prob.d() {
        return Err(Error::Invalid(format!(
            "start point has {} entries but the problem has {} decision variables",
            start.len(),
            prob.d()
        )));
    }
    let compiled = compile_problem(prob)?;
    let fixed = FixedLambda {
        compiled: &compiled,
        lam: lam.to_vec(),
    };
    let mut sol = minimize_constrained(&fixed, start, opts)?;
    if prob.sense() == Sense::Maximize {
        sol.objective_value = -sol.objective_value;
    }
    Ok(sol)
}

/// One solved sample. `objective` is in the problem's original sense.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSample {
    pub index: usize,
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

/// Per-dimension statistics over the converged samples. `std` uses the
/// unbiased (n-1) normalization; `standard_error` is std/√n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub stats: SampleStats,
    pub samples: Vec<McSample>,
}

/// Solves `samples` independent draws of the problem from a shared start
/// point. Non-converged samples are kept in the output but excluded from the
/// statistics; more than 5% of them is treated as a failed run.
pub fn mc_solve(
    prob: &StochasticProblem,
    samples: usize,
    seed: u64,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<McRun> {
    if samples < 2 {
        return Err(Error::Invalid(format!(
            "Monte Carlo needs at least 2 samples, got {samples}"
        )));
    }
    if start.len() != prob.d() {
        return Err(Error::Invalid(format!(
            "start point has {} entries but the problem has {} decision variables",
            start.len(),
            prob.d()
        )));
    }
    opts.validate()?;
    let compiled = compile_problem(prob)?;
    let sign = match prob.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let solved: Vec<McSample> = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<McSample> {
            let lam = sample_randoms(prob, seed, s as u64)?;
            let fixed = FixedLambda {
                compiled: &compiled,
                lam,
            };
            let res = minimize_constrained(&fixed, start, opts)?;
            Ok(McSample {
                index: s,
                lambda: fixed.lam,
                x: res.a_star,
                objective: sign * res.objective_value,
                converged: res.converged,
            })
        })
        .collect::<Result<_>>()?;

    let excluded = solved.iter().filter(|s| !s.converged).count();
    if excluded * 20 > samples {
        return Err(Error::Solver(format!(
            "{excluded} of {samples} Monte Carlo samples failed to converge"
        )));
    }

    let n = samples - excluded;
    let d = prob.d();
    let mut mean = vec![0.0; d];
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for s in solved.iter().filter(|s| s.converged) {
        for i in 0..d {
            mean[i] += s.x[i];
            min[i] = min[i].min(s.x[i]);
            max[i] = max[i].max(s.x[i]);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for s in solved.iter().filter(|s| s.converged) {
        for i in 0..d {
            var[i] += (s.x[i] - mean[i]).powi(2);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / (n - 1) as f64).sqrt()).collect();
    let standard_error = std.iter().map(|s| s / (n as f64).sqrt()).collect();

    Ok(McRun {
        stats: SampleStats {
            n,
            mean,
            std,
            min,
            max,
            standard_error,
            excluded,
        },
        samples: solved,
    })
}

/// CSV of the raw per-sample optima: `sample,x1,…,xd,converged`.
pub fn samples_csv(run: &McRun) -> String {
    let d = run.stats.mean.len();
    let mut out = String::from("sample");
    for i in 1..=d {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",converged\n");
    for s in &run.samples {
        out.push_str(&format!("{}", s.index));
        for v in &s.x {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", s.converged));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;
    use crate::quadrature::gauss_rule;

    const QUADRATIC: &str = "\
[decision]
x
[random]
lambda ~ normal(0.0, 0.1)
[objective]
minimize (1 + lambda)*x^2 + x
";

    fn quadratic() -> StochasticProblem {
        parse_problem(QUADRATIC).unwrap()
    }

    #[test]
    fn per_sample_optima_match_the_closed_form() {
        let prob = quadratic();
        let run = mc_solve(&prob, 1000, 0, &[0.0], &SolveOptions::default()).unwrap();
        assert_eq!(run.stats.excluded, 0);
        for s in &run.samples {
            // Minimizer of (1+λ)x² + x is x = -1/(2(1+λ)).
            let want = -1.0 / (2.0 * (1.0 + s.lambda[0]));
            assert!((s.x[0] - want).abs() < 1e-6, "sample {}", s.index);
        }
        assert!((run.stats.mean[0] - (-0.508)).abs() < 0.01);
        assert!((run.stats.std[0] - 0.055).abs() < 0.01);
        let se = run.stats.std[0] / (run.stats.n as f64).sqrt();
        assert_eq!(run.stats.standard_error[0], se);
        assert!(run.stats.min[0] <= run.stats.mean[0] && run.stats.mean[0] <= run.stats.max[0]);

        let csv = samples_csv(&run);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("sample,x1,converged"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,") && first.ends_with(",true"));
        assert_eq!(csv.lines().count(), 1001);
    }

    #[test]
    fn draw_moments_match_the_distributions() {
        let (mut sum, mut sumsq) = (0.0, 0.0);
        let n = 100_000;
        for s in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            rng.set_stream(s);
            let z = normal_draw(&mut rng);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "normal mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "normal var {var}");

        let mut usum = 0.0;
        for s in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            rng.set_stream(s);
            let u = uniform_draw(&mut rng);
            assert!((-1.0..=1.0).contains(&u));
            usum += u;
        }
        assert!((usum / n as f64).abs() < 0.01, "uniform mean");
    }

    #[test]
    fn error_of_the_mean_shrinks_with_sample_count() {
        // Reference mean of x*(λ) = -1/(2(1+λ)) under λ ~ N(0, 0.1).
        let rule = gauss_rule(PolynomialFamily::Hermite, 64).unwrap();
        let truth: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| w * (-1.0 / (2.0 * (1.0 + 0.1 * t))))
            .sum();
        let prob = quadratic();
        let errs: Vec<f64> = [100, 1000, 10000]
            .iter()
            .map(|&n| {
                let run = mc_solve(&prob, n, 0, &[0.0], &SolveOptions::default()).unwrap();
                (run.stats.mean[0] - truth).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn degenerate_distribution_collapses_the_spread() {
        let text = "\
[decision]
x
[random]
lambda ~ normal(2.0, 1e-12)
[objective]
minimize (x - lambda)^2
";
        let prob = parse_problem(text).unwrap();
        let run = mc_solve(&prob, 50, 3, &[0.0], &SolveOptions::default()).unwrap();
        assert!((run.stats.mean[0] - 2.0).abs() < 1e-9);
        assert!(run.stats.std[0] < 1e-9);
        assert!(run.stats.max[0] - run.stats.min[0] < 1e-9);
    }

    #[test]
    fn reruns_are_bitwise_identical_across_thread_counts() {
        let prob = quadratic();
        let opts = SolveOptions::default();
        let base = mc_solve(&prob, 200, 7, &[0.0], &opts).unwrap();
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let again = pool.install(|| mc_solve(&prob, 200, 7, &[0.0], &opts).unwrap());
            for i in 0..200 {
                assert_eq!(
                    base.samples[i].x[0].to_bits(),
                    again.samples[i].x[0].to_bits(),
                    "{threads} threads, sample {i}"
                );
            }
            assert_eq!(base.stats.mean[0].to_bits(), again.stats.mean[0].to_bits());
            assert_eq!(base.stats.std[0].to_bits(), again.stats.std[0].to_bits());
            assert_eq!(samples_csv(&base), samples_csv(&again));
        }
    }

    #[test]
    fn rejects_undersampling_bad_starts_and_mass_nonconvergence() {
        let prob = quadratic();
        let opts = SolveOptions::default();
        assert!(matches!(
            mc_solve(&prob, 1, 0, &[0.0], &opts),
            Err(Error::Invalid(_))
        ));
        assert!(matches!(
            mc_solve(&prob, 10, 0, &[0.0, 0.0], &opts),
            Err(Error::Invalid(_))
        ));

        // Unbounded objective: every sample runs out of iterations.
        let text = "\
[decision]
x
[random]
lambda ~ normal(0.0, 0.1)
[objective]
minimize x + lambda
";
        let unbounded = parse_problem(text).unwrap();
        let short = SolveOptions {
            max_iters: 30,
            ..SolveOptions::default()
        };
        let err = mc_solve(&unbounded, 10, 0, &[0.0], &short).unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
        assert!(err.to_string().contains("failed to converge"));
    }
}
