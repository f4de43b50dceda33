use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kahler_core::continuity::{solve_ma, SolverOptions, TwistField};
use kahler_core::geometry::{chern_curvature, kappa_field, ExtremizerOptions, MetricField};
use kahler_core::grid::{ddbar_matrix, flat_laplacian, Lattice, RealField};

fn wave(lat: &Lattice, amp: f64) -> RealField {
    RealField::from_fn(lat, |x| amp * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos())
}

fn product(res: usize) -> MetricField {
    let lat = Lattice::unit(1, res).unwrap();
    let a = MetricField::conformal(&RealField::from_fn(&lat, |x| 0.15 * (2.0 * PI * x[0]).cos())).unwrap();
    let b = MetricField::conformal(&RealField::from_fn(&lat, |x| 0.1 * (2.0 * PI * x[1]).sin())).unwrap();
    MetricField::product(&a, &b).unwrap()
}

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for res in [64, 128, 256] {
        let lat = Lattice::unit(1, res).unwrap();
        let f = wave(&lat, 0.3);
        group.bench_with_input(BenchmarkId::new("flat_laplacian", res), &f, |b, f| b.iter(|| flat_laplacian(f)));
        group.bench_with_input(BenchmarkId::new("ddbar_matrix", res), &f, |b, f| b.iter(|| ddbar_matrix(f)));
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let mut group = c.benchmark_group("curvature");
    group.sample_size(10);
    for res in [8, 16] {
        let g = product(res);
        group.bench_with_input(BenchmarkId::new("chern_curvature", res), &g, |b, g| b.iter(|| chern_curvature(g)));
        let curv = chern_curvature(&g);
        let opts = ExtremizerOptions::default();
        group.bench_with_input(BenchmarkId::new("kappa_field", res), &g, |b, g| b.iter(|| kappa_field(&curv, g, &opts)));
    }
    group.finish();
}

fn monge_ampere(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_ma");
    group.sample_size(10);
    for res in [32, 64] {
        let lat = Lattice::unit(1, res).unwrap();
        let g = MetricField::conformal(&wave(&lat, 0.3)).unwrap();
        let twist = TwistField::geometric(&g);
        let opts = SolverOptions::default();
        group.bench_with_input(BenchmarkId::new("conformal_eps_0.1", res), &g, |b, g| {
            b.iter(|| solve_ma(g, &twist, 0.1, &opts, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, curvature, monge_ampere);
criterion_main!(benches);
