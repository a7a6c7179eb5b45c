use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use landau_bench::{operator, variable_field};
use landau_core::model::{sample_fields, Grid};
use landau_core::predictor::weyl_count_prediction;
use landau_core::spectral::{eigenpairs_with, EigsOptions, Slicer};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    for p in [8u32, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| b.iter(|| operator(p)));
    }
    group.finish();
}

fn inertia(c: &mut Criterion) {
    let mut group = c.benchmark_group("inertia");
    group.sample_size(10);
    for p in [8u32, 32, 64] {
        let op = operator(p);
        let slicer = Slicer::new(&op.matrix);
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| {
            b.iter(|| slicer.inertia(1.0).expect("factorization"))
        });
    }
    group.finish();
}

fn eigenpairs(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigenpairs [0.9, 1.1]");
    group.sample_size(10);
    for p in [8u32, 16] {
        let op = operator(p);
        let slicer = Slicer::new(&op.matrix);
        let opts = EigsOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| {
            b.iter(|| eigenpairs_with(&slicer, (0.9, 1.1), &opts).expect("eigenpairs"))
        });
    }
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let spec = variable_field();
    let grid = Grid::new(&spec.domain, &[256, 256]).expect("grid");
    let samples = sample_fields(&spec, &grid).expect("samples");
    c.bench_function("weyl prediction 256²", |b| {
        b.iter(|| weyl_count_prediction(&samples, (0.9, 1.1), 1.0))
    });
}

criterion_group!(benches, assembly, inertia, eigenpairs, prediction);
criterion_main!(benches);
