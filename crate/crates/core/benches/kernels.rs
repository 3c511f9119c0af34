use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fraciso::domain::{Domain1D, Mesh1D};
use fraciso::fracop::FracOperator;
use fraciso::isoperimetry::{Alpha, Harness};
use fraciso::toeplitz::ToeplitzInverse;
use fraciso::torsion::generalized_torsion;

fn operator(literal: &str, cells: usize, s: f64) -> FracOperator {
    let d: Domain1D = literal.parse().unwrap();
    FracOperator::assemble(Arc::new(Mesh1D::build(&d, cells).unwrap()), s).unwrap()
}

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for cells in [1024, 4096, 16384] {
        let op = operator("(-1,-0.2),(0.2,1)", cells, 0.5);
        let u: Vec<f64> = (0..op.len()).map(|k| (k as f64 * 0.01).sin()).collect();
        let mut out = vec![0.0; op.len()];
        group.bench_with_input(BenchmarkId::new("parallel", cells), &cells, |b, _| {
            b.iter(|| op.apply_into(black_box(&u), &mut out))
        });
        group.bench_with_input(BenchmarkId::new("sequential", cells), &cells, |b, _| {
            b.iter(|| op.apply_sequential_into(black_box(&u), &mut out))
        });
    }
    group.finish();
}

fn toeplitz(c: &mut Criterion) {
    let mut group = c.benchmark_group("toeplitz_solve");
    for n in [1023, 4095] {
        let op = operator("(-1,1)", n + 1, 0.5);
        let col: Vec<f64> = (0..n).map(|j| op.entry(0, j)).collect();
        let inv = ToeplitzInverse::new(&col).unwrap();
        let b: Vec<f64> = vec![1.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| bch.iter(|| inv.solve(black_box(&b))));
    }
    group.finish();
}

fn torsion(c: &mut Criterion) {
    let op = operator("(0,0.5),(0.75,1.25),(1.5,2.5)", 1024, 0.5);
    c.bench_function("torsion_solve_1024", |b| b.iter(|| generalized_torsion(&op, black_box(-2.0)).unwrap()));
}

fn scan(c: &mut Criterion) {
    let d: Domain1D = "(-1.5,-0.5),(0.25,1.25)".parse().unwrap();
    let alphas = [Alpha::Absolute(-4.0), Alpha::Absolute(0.0), Alpha::Relative(0.5), Alpha::Relative(0.9)];
    let harness = Harness::new();
    harness.reference(0.5, 256).unwrap();
    let mut group = c.benchmark_group("kohler_jobin_scan");
    group.sample_size(10);
    group.bench_function("M256", |b| b.iter(|| harness.kohler_jobin_scan(&d, 0.5, &alphas, 256).unwrap()));
    group.finish();
}

criterion_group!(benches, apply, toeplitz, torsion, scan);
criterion_main!(benches);
