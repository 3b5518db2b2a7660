use std::hint::black_box;

use caplab_core::body::{unit, Sign};
use caplab_core::grid::{avg_ak, random_bandlimited, MeasureSource};
use caplab_core::oscint::{m_kn, sigma_hat};
use caplab_core::{ConvexBoundary, Family, GraphCurve};
use criterion::{criterion_group, criterion_main, Criterion};

fn caps(c: &mut Criterion) {
    let body = ConvexBoundary::ellipse(2.0, 1.0).unwrap();
    let th = unit(0.3);
    c.bench_function("cap ellipse delta 1e-6", |b| {
        b.iter(|| body.cap(black_box(th), black_box(1e-6), Sign::Plus).unwrap())
    });
    let flat = ConvexBoundary::flat_spot(Family::ExpFlat { a: 1.0 }, None).unwrap();
    c.bench_function("lambda expflat delta 1e-9", |b| {
        b.iter(|| flat.lambda(black_box(unit(0.5 * std::f64::consts::PI)), black_box(1e-9)).unwrap())
    });
}

fn transforms(c: &mut Criterion) {
    let body = ConvexBoundary::ellipse(2.0, 1.0).unwrap();
    c.bench_function("sigma_hat ellipse r 1e3", |b| {
        b.iter(|| sigma_hat(&body, black_box([600.0, 800.0]), 1e-10).unwrap())
    });
    let g = GraphCurve::power(4.0).unwrap();
    c.bench_function("m_kn power4 k 12", |b| {
        b.iter(|| m_kn(&g, 12, black_box(3), black_box([-1500.0, 4096.0])).unwrap())
    });
}

fn partitions(c: &mut Criterion) {
    let g = GraphCurve::exp_flat(1.0).unwrap();
    c.bench_function("partition expflat k 16", |b| b.iter(|| g.partition(black_box(16)).unwrap()));
}

fn averages(c: &mut Criterion) {
    let body = ConvexBoundary::circle(1.0).unwrap();
    let f = random_bandlimited(256, 16.0, 32, 1).unwrap();
    c.bench_function("avg_ak circle 256^2", |b| {
        b.iter(|| avg_ak(black_box(&f), MeasureSource::Body(&body), 0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = caps, transforms, partitions, averages
}
criterion_main!(benches);
