use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dwcgp_bench::random_grid;
use dwcgp_core::dwcgp::{compute_dwcgp_grids, DwcgpConfig};
use dwcgp_core::evaluation::{ks_two_sample, DEFAULT_ALPHA};

fn estimator(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_dwcgp");
    for (h, w) in [(96, 96), (432, 648)] {
        let grass = random_grid(h, w, 0.4, 1);
        let vertical = random_grid(h, w, 0.7, 2);
        let cfg = DwcgpConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{h}x{w}")), &(), |b, _| {
            b.iter(|| compute_dwcgp_grids(black_box(&grass), black_box(&vertical), &cfg).unwrap())
        });
    }
    group.finish();
}

fn ks(c: &mut Criterion) {
    let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
    let y: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.11).cos()).collect();
    c.bench_function("ks_two_sample_1000", |b| b.iter(|| ks_two_sample(black_box(&x), black_box(&y), DEFAULT_ALPHA)));
}

criterion_group!(benches, estimator, ks);
criterion_main!(benches);
