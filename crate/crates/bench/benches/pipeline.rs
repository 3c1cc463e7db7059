use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use trainpoly::cones::{cones_equal, fried_cone, mcmullen_cone};
use trainpoly::mcpoly::{cycle_polynomial, det_polynomial};
use trainpoly::spectral::entropy;
use trainpoly::{fixtures, LabeledTransitionGraph};
use trainpoly_bench::labeled_workloads;

fn polynomials(c: &mut Criterion) {
    let mut group = c.benchmark_group("polynomial");
    for (name, l) in labeled_workloads() {
        group.bench_with_input(BenchmarkId::new("det", &name), &l, |b, l| b.iter(|| det_polynomial(black_box(l))));
        group.bench_with_input(BenchmarkId::new("cycle", &name), &l, |b, l| b.iter(|| cycle_polynomial(black_box(l))));
    }
    group.finish();
}

fn circuits(c: &mut Criterion) {
    for (name, l) in labeled_workloads() {
        c.bench_function(&format!("circuits/{name}"), |b| b.iter(|| black_box(&l).circuits()));
    }
}

fn cones(c: &mut Criterion) {
    let p = fixtures::running_polynomial();
    let orbits = fixtures::running_orbit_classes();
    c.bench_function("cones/running", |b| {
        b.iter(|| {
            let mc = mcmullen_cone(black_box(&p), None, None).unwrap();
            let fc = fried_cone(black_box(&orbits), 2, None).unwrap();
            cones_equal(&mc, &fc).unwrap()
        })
    });
}

fn spectral(c: &mut Criterion) {
    let m = fixtures::running_marked();
    let l = LabeledTransitionGraph::build(&m);
    let coords = fixtures::running_coordinates(&m);
    let cone = fried_cone(&fixtures::running_orbit_classes(), 2, None).unwrap();
    c.bench_function("entropy/running-u1", |b| {
        b.iter(|| entropy(&l, &coords, &cone, black_box(&[-1.0, 2.0]), 1e-12).unwrap())
    });
}

fn stallings(c: &mut Criterion) {
    let phi1 = fixtures::phi1();
    let phi2 = fixtures::phi2();
    c.bench_function("fold/phi1", |b| b.iter(|| black_box(&phi1).fold()));
    c.bench_function("stable-image/phi2", |b| b.iter(|| black_box(&phi2).stable_image_index(64).unwrap()));
}

criterion_group!(benches, polynomials, circuits, cones, spectral, stallings);
criterion_main!(benches);
