use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use damplast_bench::{damaged_state, plate};
use damplast_core::solver::{incremental_step, SolverConfig};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_energy");
    for n in [8, 16, 32] {
        let m = plate(n);
        let q = damaged_state(&m, 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| m.assemble_energy(black_box(0.5), black_box(&q)).unwrap())
        });
    }
    group.finish();
}

fn elastic(c: &mut Criterion) {
    let mut group = c.benchmark_group("elastic_solve");
    for n in [8, 16, 32] {
        let m = plate(n);
        let q = damaged_state(&m, 0.5);
        group
            .bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| m.elastic_solve(black_box(0.6), &q.chi, &q.d).unwrap()));
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("incremental_step");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    for n in [4, 8] {
        let m = plate(n);
        let q = damaged_state(&m, 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| incremental_step(&m, black_box(0.6), &q, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, elastic, step);
criterion_main!(benches);
