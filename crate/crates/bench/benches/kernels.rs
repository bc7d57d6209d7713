use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sigma2_bench::{manufactured, spectra};
use sigma2_core::concavity::{assemble, det_identity, det_identity_f64, spectral};
use sigma2_core::geometry::ScalarField;
use sigma2_core::solver::{linearized_apply, newton_solve, residual};

fn concavity(c: &mut Criterion) {
    let mut g = c.benchmark_group("concavity");
    for n in [3, 6, 12] {
        let etas = spectra(n, 64);
        g.bench_with_input(BenchmarkId::new("det_identity", n), &etas, |b, etas| {
            b.iter(|| etas.iter().map(|e| det_identity(black_box(e)).unwrap().0).sum::<f64>())
        });
        g.bench_with_input(BenchmarkId::new("det_identity_f64", n), &etas, |b, etas| {
            b.iter(|| etas.iter().map(|e| det_identity_f64(black_box(e)).unwrap().0).sum::<f64>())
        });
        g.bench_with_input(BenchmarkId::new("spectral", n), &etas, |b, etas| {
            b.iter(|| etas.iter().map(|e| spectral(&assemble(black_box(e)).unwrap()).unwrap().kappas[0]).sum::<f64>())
        });
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solver");
    g.sample_size(10);
    for res in [16, 32] {
        let (phi, cfg) = manufactured(2, res);
        g.bench_with_input(BenchmarkId::new("residual", res), &res, |b, _| b.iter(|| residual(black_box(&phi), &cfg).unwrap()));
        let u = ScalarField::from_fn(phi.grid, |x| x[1].sin());
        g.bench_with_input(BenchmarkId::new("linearized_apply", res), &res, |b, _| {
            b.iter(|| linearized_apply(black_box(&phi), &u, &cfg).unwrap())
        });
    }
    let (phi, cfg) = manufactured(2, 16);
    let zero = ScalarField::zeros(phi.grid);
    g.bench_function("newton_solve/16", |b| b.iter(|| newton_solve(&cfg, black_box(&zero)).unwrap().iters));
    g.finish();
}

criterion_group!(benches, concavity, solver);
criterion_main!(benches);
