use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qkd_core::postproc::sample_pa_matrices;
use qkd_core::protosim::run_protocol;
use qkd_core::rates::{optimize_mu, phase_error_closed, phase_error_numeric, sweep_distance};
use qkd_core::{EveStrategy, SourceKind, SourceVariant, SystemParams, VariantKind};

fn phase_error(c: &mut Criterion) {
    c.bench_function("phase_error_closed", |b| {
        b.iter(|| phase_error_closed(black_box(0.03), black_box(0.02), 0.0))
    });
    c.bench_function("phase_error_numeric", |b| {
        b.iter(|| phase_error_numeric(black_box(0.03), black_box(0.02)))
    });
}

fn rates(c: &mut Criterion) {
    let params = SystemParams::gys_like();
    c.bench_function("optimize_mu_random_20km", |b| {
        b.iter(|| optimize_mu(SourceKind::Random, black_box(20.0), &params).unwrap())
    });
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("random_0_150_1", |b| {
        b.iter(|| sweep_distance(SourceKind::Random, 0.0, 150.0, 1.0, &params).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let params = SystemParams::gys_like();
    let chan = params.channel(10.0);
    let source = SourceVariant::with_mu(VariantKind::UnmodulatedRef, 0.1, 1.0).unwrap();
    let mut g = c.benchmark_group("run_protocol");
    g.sample_size(10);
    g.bench_function("1e6_rounds", |b| {
        b.iter(|| {
            run_protocol(
                1_000_000,
                source,
                &chan,
                &params.detector,
                EveStrategy::None,
                1,
            )
            .unwrap()
        })
    });
    g.finish();
}

fn privacy_amplification(c: &mut Criterion) {
    c.bench_function("sample_pa_matrices_256_128", |b| {
        b.iter(|| sample_pa_matrices(256, 128, black_box(5)).unwrap())
    });
}

criterion_group!(
    benches,
    phase_error,
    rates,
    simulation,
    privacy_amplification
);
criterion_main!(benches);
