//! Sequential versus rayon execution of the hot kernels.
//!
//! Every benchmark runs twice, once with `par::set_parallel(false)` and once with the rayon path
//! enabled; both produce bit-identical results, so only the timings differ. Without the
//! `parallel` feature the two variants coincide.

use chemotaxis_core::diagnostics::{self, DiagConfig};
use chemotaxis_core::grid::{self, Field, GridSpec};
use chemotaxis_core::model::{ModelParams, State};
use chemotaxis_core::par;
use chemotaxis_core::stepper::{self, FaceOperator, LinearOperator, Multigrid, Preconditioner, SolverConfig};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

const SIZES: [usize; 2] = [64, 256];

fn bump(spec: GridSpec) -> State {
    let u = Field::from_fn(spec, |x| {
        0.5 + 10.0 * (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 0.02).exp()
    })
    .unwrap();
    let v = Field::from_fn(spec, |x| 0.5 + 0.5 * (3.0 * x[0]).cos() * (2.0 * x[1]).sin().abs())
        .unwrap();
    State::new(u, v, 0.0).unwrap()
}

fn modes() -> [(&'static str, bool); 2] {
    [("sequential", false), ("rayon", true)]
}

fn bench_laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian");
    for n in SIZES {
        let s = bump(GridSpec::uniform(2, n, 1.0).unwrap());
        for (name, on) in modes() {
            par::set_parallel(on);
            group.bench_with_input(BenchmarkId::new(name, n), &s.v, |b, v| {
                b.iter(|| grid::laplacian_neumann(black_box(v)))
            });
        }
    }
    par::set_parallel(true);
    group.finish();
}

fn bench_operator(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_apply");
    for n in SIZES {
        let spec = GridSpec::uniform(2, n, 1.0).unwrap();
        let op = FaceOperator::shifted_laplacian(vec![1.0; spec.len()], 0.01, spec).unwrap();
        let x = bump(spec).u.into_values();
        let mut out = vec![0.0; x.len()];
        for (name, on) in modes() {
            par::set_parallel(on);
            group.bench_function(BenchmarkId::new(name, n), |b| {
                b.iter(|| op.apply(black_box(&x), &mut out))
            });
        }
    }
    par::set_parallel(true);
    group.finish();
}

fn bench_vcycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("multigrid_cycle");
    for n in SIZES {
        let spec = GridSpec::uniform(2, n, 1.0).unwrap();
        let op = FaceOperator::shifted_laplacian(vec![1.0; spec.len()], 0.01, spec).unwrap();
        let mg = Multigrid::new(&op);
        let r = bump(spec).u.into_values();
        let mut z = vec![0.0; r.len()];
        for (name, on) in modes() {
            par::set_parallel(on);
            group.bench_function(BenchmarkId::new(name, n), |b| {
                b.iter(|| mg.apply(black_box(&r), &mut z))
            });
        }
    }
    par::set_parallel(true);
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("cg_solve");
    group.sample_size(20);
    for n in SIZES {
        let spec = GridSpec::uniform(2, n, 1.0).unwrap();
        let op = FaceOperator::shifted_laplacian(vec![1.0; spec.len()], 0.01, spec).unwrap();
        let b = bump(spec).u;
        for (name, on) in modes() {
            par::set_parallel(on);
            group.bench_function(BenchmarkId::new(name, n), |bch| {
                bch.iter(|| stepper::solve_spd(&op, black_box(&b), None, 1e-10, 1000).unwrap())
            });
        }
    }
    par::set_parallel(true);
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("imex_step");
    group.sample_size(10);
    let params = ModelParams::new(1.0, 1.0, 1.5).unwrap();
    let cfg = SolverConfig::with_t_end(1.0);
    for n in SIZES {
        let s = bump(GridSpec::uniform(2, n, 1.0).unwrap());
        let dt = stepper::choose_dt(&s, &params, &cfg);
        for (name, on) in modes() {
            par::set_parallel(on);
            group.bench_function(BenchmarkId::new(name, n), |b| {
                b.iter(|| stepper::step(black_box(&s), dt, &params, &cfg).unwrap())
            });
        }
    }
    par::set_parallel(true);
    group.finish();
}

fn bench_snapshot(c: &mut Criterion) {
    let mut group = c.benchmark_group("functional_snapshot");
    let params = ModelParams::new(1.0, 1.0, 1.5).unwrap();
    let cfg = DiagConfig::default();
    for n in SIZES {
        let s = bump(GridSpec::uniform(2, n, 1.0).unwrap());
        for (name, on) in modes() {
            par::set_parallel(on);
            group.bench_function(BenchmarkId::new(name, n), |b| {
                b.iter(|| diagnostics::functional_snapshot(black_box(&s), &params, &cfg))
            });
        }
    }
    par::set_parallel(true);
    group.finish();
}

criterion_group!(
    benches,
    bench_laplacian,
    bench_operator,
    bench_vcycle,
    bench_solve,
    bench_step,
    bench_snapshot
);
criterion_main!(benches);
