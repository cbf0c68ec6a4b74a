use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use procsim::scenarios::Variant;
use procsim::stats::sweep_sequential;

const NS: [usize; 6] = [2, 4, 6, 8, 12, 16];
const SEEDS: [u64; 4] = [0, 1, 2, 3];
const HORIZON: f64 = 5_000.0;

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("ordered+bowl sweep");
    group.sample_size(10);
    let variants = [Variant::Ordered, Variant::Bowl];
    group.bench_function("sequential", |b| {
        b.iter(|| sweep_sequential(black_box(&variants), &NS, HORIZON, &SEEDS).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| {
            procsim::stats::sweep_parallel(black_box(&variants), &NS, HORIZON, &SEEDS).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
