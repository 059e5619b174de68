use criterion::{criterion_group, criterion_main, Criterion};
use oscilla::correctors::{truncation, CorrectorOrder};
use oscilla::fem::{assemble, Gauge};
use oscilla::homogenized::{solve_homogenized, TrigPoly};
use oscilla::mesh::{build_cell_mesh, build_strip_mesh};
use oscilla::strip::{solve_thin_on, strip_form};
use oscilla::{EpsilonValue, SolveOptions};
use oscilla_bench::{reference_cell, reference_profile};
use std::sync::Arc;
use std::time::Duration;

fn cell_problems(c: &mut Criterion) {
    let mut group = c.benchmark_group("cell");
    group.measurement_time(Duration::from_secs(8)).sample_size(10);
    let g = reference_profile();
    group.bench_function("mesh 128x32", |b| b.iter(|| build_cell_mesh(&g, 128, 32).unwrap()));
    group.bench_function("X0 + q0 + Theta 64x16", |b| b.iter(|| reference_cell(64, 16)));
    group.finish();
}

fn strip_problems(c: &mut Criterion) {
    let mut group = c.benchmark_group("strip");
    group.measurement_time(Duration::from_secs(8)).sample_size(10);
    let g = reference_profile();
    let eps = EpsilonValue::new(8).unwrap();
    let mesh = Arc::new(build_strip_mesh(&g, eps, 16, 8, usize::MAX).unwrap());
    let f = TrigPoly::cos(1);
    group.bench_function("assemble eps=1/8", |b| b.iter(|| assemble(&mesh, &strip_form(&f), Gauge::None).unwrap()));
    group.bench_function("solve eps=1/8", |b| b.iter(|| solve_thin_on(&mesh, eps, &f, &SolveOptions::default()).unwrap()));
    let cell = reference_cell(16, 8);
    let w0 = solve_homogenized(cell.q0.q0, &f).unwrap();
    group.bench_function("second-order truncation eps=1/8", |b| {
        b.iter(|| truncation(CorrectorOrder::Second, &w0, &cell, &mesh).unwrap())
    });
    group.finish();
}

criterion_group!(benches, cell_problems, strip_problems);
criterion_main!(benches);
