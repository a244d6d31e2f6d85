use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fluidps_core::measures::make_measure;
use fluidps_core::renewal::{compute_renewal_function, compute_renewal_function_single};
use fluidps_core::{solve, GridParams, ServiceDistribution};

fn renewal(c: &mut Criterion) {
    let d = ServiceDistribution::pareto(0.75, 4.0).unwrap();
    let mut group = c.benchmark_group("renewal");
    group.sample_size(10);
    for u_max in [100.0, 400.0] {
        group.bench_with_input(BenchmarkId::new("richardson", u_max), &u_max, |b, &u| {
            b.iter(|| compute_renewal_function(black_box(&d), 0.01, u).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("single", u_max), &u_max, |b, &u| {
            b.iter(|| compute_renewal_function_single(black_box(&d), 0.01, u).unwrap())
        });
    }
    group.finish();
}

fn fluid(c: &mut Criterion) {
    let d = ServiceDistribution::exponential(1.0).unwrap();
    let g = GridParams::default();
    let xi = make_measure(&"uniformdensity:a=0,b=2,mass=1".parse().unwrap(), None, &g).unwrap();
    let mut group = c.benchmark_group("fluid");
    group.sample_size(10);
    group.bench_function("solve", |b| b.iter(|| solve(black_box(&xi), &d, &g).unwrap()));
    let sol = solve(&xi, &d, &g).unwrap();
    group.bench_function("measure_at", |b| b.iter(|| sol.measure_at(black_box(7.5)).unwrap()));
    group.finish();
}

criterion_group!(benches, renewal, fluid);
criterion_main!(benches);
