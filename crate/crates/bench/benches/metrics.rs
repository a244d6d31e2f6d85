use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fluidps_core::measures::{make_measure, scaled_excess};
use fluidps_core::{prohorov, total_variation, GridParams, ServiceDistribution};

fn distances(c: &mut Criterion) {
    let g = GridParams::heavy_tailed();
    let d = ServiceDistribution::pareto(0.75, 4.0).unwrap();
    let a = scaled_excess(&d, 1.0, &g).unwrap();
    let b = make_measure(&"paretodensity:xm=1,p=2.5,mass=1".parse().unwrap(), None, &g).unwrap();
    c.bench_function("prohorov 20k cells", |bench| {
        bench.iter(|| prohorov(black_box(&a), black_box(&b)).unwrap())
    });
    c.bench_function("total variation 20k cells", |bench| {
        bench.iter(|| total_variation(black_box(&a), black_box(&b)).unwrap())
    });
}

criterion_group!(benches, distances);
criterion_main!(benches);
