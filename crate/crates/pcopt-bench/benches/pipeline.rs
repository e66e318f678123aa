//! Benchmarks along the main pipeline: quadrature construction, evaluating
//! a transformed objective, a full expansion solve, and a Monte Carlo run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pcopt_core::examples;
use pcopt_core::{
    gauss_rule, run_mc, solve_pc, transform_with, ConstraintMode, PolynomialFamily, SolveOptions,
};

fn bench_pipeline(c: &mut Criterion) {
    c.bench_function("gauss_rule hermite n=16", |b| {
        b.iter(|| gauss_rule(PolynomialFamily::Hermite, black_box(16)).unwrap())
    });

    let quadratic = examples::quadratic().unwrap();
    let det = transform_with(&quadratic.problem, 4, 10, ConstraintMode::Expectation).unwrap();
    let point: Vec<f64> = (0..det.dim()).map(|i| 0.1 * i as f64 - 0.3).collect();
    let mut grad = vec![0.0; det.dim()];
    c.bench_function("transformed objective + gradient (order 4, 10 nodes)", |b| {
        b.iter(|| det.objective_grad(black_box(&point), &mut grad).unwrap())
    });

    c.bench_function("quadratic expansion solve (order 2)", |b| {
        b.iter(|| solve_pc(&quadratic.problem, &quadratic.starts[0], &quadratic.settings).unwrap())
    });

    c.bench_function("quadratic monte carlo, 64 samples", |b| {
        b.iter(|| {
            run_mc(
                &quadratic.problem,
                black_box(64),
                0,
                &quadratic.starts[0],
                &SolveOptions::default(),
            )
            .unwrap()
        })
    });

    let himmelblau = examples::himmelblau().unwrap();
    c.bench_function("himmelblau expansion solve (order 1)", |b| {
        b.iter(|| {
            solve_pc(&himmelblau.problem, &himmelblau.starts[0], &himmelblau.settings).unwrap()
        })
    });
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
