use std::hint::black_box;

use cbm_bench::rule;
use cbm_core::nonneg::{critical_c0, ram_quantities, ContractionFamily};
use cbm_core::Measure;
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_ram(c: &mut Criterion) {
    let rule = rule();
    let mu = Measure::uniform(-0.5, 0.5).unwrap();
    let rho = Measure::uniform(-0.4, 0.4).unwrap();
    c.bench_function("ram_quantities/uniform", |b| {
        b.iter(|| ram_quantities(black_box(&mu), black_box(&rho), &rule).unwrap())
    });
    let (mu, rho) = ContractionFamily::new(0.5, 0.1)
        .unwrap()
        .measures()
        .unwrap();
    c.bench_function("ram_quantities/power_tail", |b| {
        b.iter(|| ram_quantities(black_box(&mu), black_box(&rho), &rule).unwrap())
    });
    c.bench_function("critical_c0", |b| {
        b.iter(|| critical_c0(black_box(0.5), 1e-12).unwrap())
    });
}

criterion_group!(benches, bench_ram);
criterion_main!(benches);
