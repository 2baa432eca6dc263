use std::hint::black_box;

use cbm_bench::{additive_uniform, heterogeneous, rule, ALPHA};
use cbm_core::asymptotics::{asymptotic_weights, hetero_solve, solve_weights, summary};
use cbm_core::QuadratureRule;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_summary(c: &mut Criterion) {
    let spec = additive_uniform();
    let mut group = c.benchmark_group("summary");
    for order in [16, 64, 256] {
        let rule = QuadratureRule::new(order).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(order), &rule, |b, rule| {
            b.iter(|| summary(black_box(&spec), rule).unwrap())
        });
    }
    group.finish();
}

fn bench_weights(c: &mut Criterion) {
    let rule = rule();
    let spec = additive_uniform();
    let s = summary(&spec, &rule).unwrap();
    c.bench_function("asymptotic_weights", |b| {
        b.iter(|| asymptotic_weights(black_box(&s), &ALPHA).unwrap())
    });
    c.bench_function("solve_weights/shared", |b| {
        b.iter(|| solve_weights(black_box(&spec), &rule).unwrap())
    });
    let hetero = heterogeneous();
    c.bench_function("hetero_solve", |b| {
        b.iter(|| hetero_solve(black_box(&hetero), &rule).unwrap())
    });
}

criterion_group!(benches, bench_summary, bench_weights);
criterion_main!(benches);
