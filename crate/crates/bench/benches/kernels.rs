use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pconvex::linalg::BandMatrix;
use pconvex::newton::NewtonProblem;
use pconvex::PConvexOperator;
use pconvex_bench::{manufactured, spectra, surface_problem};

fn operator_jet(c: &mut Criterion) {
    let mut g = c.benchmark_group("operator_jet");
    for (n, p) in [(2, 1), (3, 2), (6, 3), (10, 5), (12, 6)] {
        let op = PConvexOperator::new(n, p).unwrap();
        let samples = spectra(n, p, 64);
        g.bench_with_input(BenchmarkId::new("jet", format!("{n}_{p}")), &samples, |b, s| {
            b.iter(|| s.iter().map(|l| op.jet(black_box(l)).unwrap().value_tilde).sum::<f64>())
        });
        g.bench_with_input(BenchmarkId::new("gradient", format!("{n}_{p}")), &samples, |b, s| {
            b.iter(|| s.iter().map(|l| op.gradient(black_box(l)).unwrap().0).sum::<f64>())
        });
    }
    g.finish();
}

fn surface_assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("surface");
    g.sample_size(20);
    for p in [1, 2] {
        let (op, rhs) = manufactured(p);
        for n_theta in [32, 64] {
            let (problem, x) = surface_problem(&op, &rhs, n_theta);
            let id = format!("p{p}_{n_theta}x{}", 2 * n_theta);
            g.bench_function(BenchmarkId::new("residual", &id), |b| {
                b.iter(|| problem.evaluate(black_box(&x)).unwrap().max_norm())
            });
            g.bench_function(BenchmarkId::new("jacobian", &id), |b| {
                b.iter(|| problem.jacobian(black_box(&x)).unwrap().len())
            });
        }
    }
    g.finish();
}

/// Diagonally dominant band system with the bandwidth of a surface Jacobian.
fn band_system(n: usize, bw: usize) -> BandMatrix {
    let mut m = BandMatrix::zeros(n, bw, bw);
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let hi = (i + bw).min(n - 1);
        for j in lo..=hi {
            let v = if i == j { 4.0 * bw as f64 } else { -1.0 / (1.0 + (i as f64 - j as f64).abs()) };
            m.add(i, j, v);
        }
    }
    m
}

fn band_lu(c: &mut Criterion) {
    let mut g = c.benchmark_group("band_lu");
    g.sample_size(20);
    for (n_theta, n_phi) in [(32, 64), (64, 128)] {
        let n = n_theta * n_phi + 2;
        let bw = 2 * n_theta + 2;
        let m = band_system(n, bw);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let id = format!("{n_theta}x{n_phi}");
        g.bench_function(BenchmarkId::new("factor", &id), |b| b.iter(|| m.clone().factor().unwrap()));
        let lu = m.clone().factor().unwrap();
        g.bench_function(BenchmarkId::new("solve", &id), |b| b.iter(|| lu.solve(black_box(&rhs))));
    }
    g.finish();
}

criterion_group!(benches, operator_jet, surface_assembly, band_lu);
criterion_main!(benches);
