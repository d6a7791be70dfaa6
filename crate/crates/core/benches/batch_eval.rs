//! Parallel vs sequential batch evaluation of the Helmholtz suite.
//!
//! With default features `batch_map` dispatches through rayon; the
//! sequential baseline is a plain iterator over the same closure. Build with
//! `--no-default-features` to measure the fallback path under `batch_map`
//! itself.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sprayverify::driver::SamplingConfig;
use sprayverify::examples::{builtin_finsler, builtin_spray};
use sprayverify::metrizability::{helmholtz_residuals, Multiplier};
use sprayverify::par::batch_map;

fn bench_batch(c: &mut Criterion) {
    let spray = builtin_spray("spiral").unwrap();
    let mult = Multiplier::hessian_of(builtin_finsler("spiral").unwrap()).unwrap();
    let mut group = c.benchmark_group("helmholtz_batch");
    for &count in &[64usize, 512] {
        let points = SamplingConfig::unit_box(3, count, 99).sample(3).unwrap();
        group.bench_with_input(BenchmarkId::new("sequential", count), &points, |b, pts| {
            b.iter(|| {
                pts.iter()
                    .map(|p| helmholtz_residuals(&spray, &mult, p, 1e-8).unwrap().aggregate)
                    .fold(0.0f64, f64::max)
            })
        });
        group.bench_with_input(BenchmarkId::new("batch_map", count), &points, |b, pts| {
            b.iter(|| {
                batch_map(pts, |p| {
                    helmholtz_residuals(&spray, &mult, p, 1e-8).unwrap().aggregate
                })
                .into_iter()
                .fold(0.0f64, f64::max)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
