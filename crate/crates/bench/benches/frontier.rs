use std::hint::black_box;

use bufsched::lp::solve_budget;
use bufsched::pareto::evaluate_deterministic_cloud;
use bufsched::policies::DEFAULT_ENUMERATION_CAP;
use bufsched::{evaluate, threshold_walk, Policy};
use bufsched_bench::{large, reference, with_buffer};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_evaluate(c: &mut Criterion) {
    let p = reference();
    let f = Policy::immediate(&p);
    c.bench_function("evaluate/reference", |b| {
        b.iter(|| evaluate(black_box(&p), black_box(&f)))
    });
}

fn bench_walk(c: &mut Criterion) {
    let mut group = c.benchmark_group("threshold_walk");
    for q in [5, 20, 40, 80] {
        let p = with_buffer(q);
        group.bench_with_input(BenchmarkId::from_parameter(q), &p, |b, p| {
            b.iter(|| threshold_walk(p))
        });
    }
    group.finish();
    let p = large();
    c.bench_function("threshold_walk/large", |b| {
        b.iter(|| threshold_walk(black_box(&p)))
    });
}

fn bench_brute_force(c: &mut Criterion) {
    let p = reference();
    let mut group = c.benchmark_group("brute_force");
    group.sample_size(20);
    group.bench_function("reference", |b| {
        b.iter(|| {
            evaluate_deterministic_cloud(black_box(&p), DEFAULT_ENUMERATION_CAP)
                .map(|c| c.frontier(&p))
        })
    });
    group.finish();
}

fn bench_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp_solve");
    let p = reference();
    group.bench_function("reference", |b| b.iter(|| solve_budget(black_box(&p), 1.2)));
    let p = large();
    let curve = threshold_walk(&p).expect("large model walks");
    let budget = 0.5 * (curve.min_power() + curve.max_power());
    group.sample_size(10);
    group.bench_function("large", |b| b.iter(|| solve_budget(black_box(&p), budget)));
    group.finish();
}

criterion_group!(
    benches,
    bench_evaluate,
    bench_walk,
    bench_brute_force,
    bench_lp
);
criterion_main!(benches);
