use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use flake_bench::fixture;
use flake_core::gram::gram_from_payloads;
use flake_core::kernel::KernelSpec;
use flake_core::masking::mask;
use flake_core::svm::cv::gram_scale;
use flake_core::svm::smo;

const SIZES: [usize; 3] = [300, 600, 1200];

fn masking(c: &mut Criterion) {
    let mut group = c.benchmark_group("masking");
    for n in SIZES {
        let fx = fixture(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &fx, |b, fx| {
            b.iter(|| mask(black_box(&fx.parts[0]), &fx.contexts[0]).unwrap())
        });
    }
    group.finish();
}

fn gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram");
    for n in SIZES {
        let fx = fixture(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &fx, |b, fx| {
            b.iter(|| gram_from_payloads(black_box(&fx.masked)).unwrap())
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("smo");
    group.sample_size(10);
    for n in SIZES {
        let fx = fixture(n);
        let g = gram_from_payloads(&fx.masked).unwrap();
        let scaled = g.values().scale(gram_scale(g.values()));
        let kernel = KernelSpec::Polynomial { offset: 1.0, degree: 3 }.from_gram(&scaled).unwrap();
        let targets: Vec<f64> = fx.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &(kernel, targets), |b, (k, y)| {
            b.iter(|| smo::train(black_box(k), y, 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, masking, gram, training);
criterion_main!(benches);
