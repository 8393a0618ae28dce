use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nonlocal_neumann::kernels::FluxKernelKind;
use nonlocal_neumann::solver::{self, GridField, Scheme};
use nonlocal_neumann_bench::Problem;
use std::hint::black_box;

fn cases() -> Vec<(&'static str, Problem)> {
    vec![
        ("interval eps=0.05", Problem::new(false, 0.05, 20.0)),
        ("disk eps=0.2", Problem::new(true, 0.2, 20.0)),
    ]
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    group.sample_size(10);
    for (name, p) in cases() {
        group.bench_function(BenchmarkId::new("operator", name), |b| b.iter(|| black_box(p.operator())));
        group.bench_function(BenchmarkId::new("flux g1", name), |b| {
            b.iter(|| black_box(p.flux(FluxKernelKind::G1)))
        });
    }
    group.finish();
}

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for (name, p) in cases() {
        let op = p.operator();
        let u: Vec<f64> = p.grid.nodes().iter().map(|x| (3.0 * x[0]).cos() + x[1]).collect();
        let mut out = vec![0.0; u.len()];
        group.bench_function(name, |b| {
            b.iter(|| {
                op.apply_into(black_box(&u), &mut out);
                black_box(out[0])
            })
        });
    }
    group.finish();
}

fn stepping(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for (name, p) in cases() {
        let op = p.operator();
        let fa = p.flux(FluxKernelKind::G2);
        let u = GridField::new(p.grid.sample(|x| x[0] * x[0]), 0.0);
        for scheme in [Scheme::Euler, Scheme::Rk4] {
            let dt = solver::auto_dt(&op);
            group.bench_function(BenchmarkId::new(scheme.to_string(), name), |b| {
                b.iter(|| black_box(solver::step(&op, &fa, &u, 0.0, dt, scheme).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, assembly, apply, stepping);
criterion_main!(benches);
