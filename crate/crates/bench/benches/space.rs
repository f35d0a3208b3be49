use std::hint::black_box;

use c1quintic::bernstein::{bb_product, BBPoly, Triangle, Vec2};
use c1quintic::mesh::refine_uniform;
use c1quintic::space::{quasi_interpolate, SplineSpace};
use c1quintic_bench::{mesh, space};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("space construction");
    g.sample_size(10);
    for level in [1, 2, 3] {
        let m = mesh("disk", level);
        g.bench_with_input(BenchmarkId::new("disk", level), &m, |b, m| {
            b.iter(|| SplineSpace::new(black_box(m.clone())).unwrap())
        });
    }
    g.finish();
}

fn refinement(c: &mut Criterion) {
    let m = mesh("ellipse", 2);
    c.bench_function("refine ellipse level 2", |b| {
        b.iter(|| refine_uniform(black_box(&m)).unwrap())
    });
}

fn evaluation(c: &mut Criterion) {
    let s = space("disk", 2);
    let f = quasi_interpolate(&s, &c1quintic::problems::disk_solution).unwrap();
    let pts: Vec<Vec2> = (0..256)
        .map(|k| {
            let th = k as f64 * 0.37;
            let r = 0.95 * ((k % 16) as f64 / 16.0).sqrt();
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    c.bench_function("spline jet at 256 points", |b| {
        b.iter(|| pts.iter().map(|&x| f.jet(x).unwrap().value).sum::<f64>())
    });
    let tri = Triangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.1), Vec2::new(0.2, 0.9));
    let p = BBPoly::new(tri, 4, (0..15).map(|i| i as f64 * 0.1 - 0.7).collect()).unwrap();
    let q = BBPoly::new(tri, 2, vec![1.0, 0.3, -0.2, 0.0, 0.5, 0.0]).unwrap();
    c.bench_function("quartic times conic", |b| {
        b.iter(|| bb_product(black_box(&p), black_box(&q)).unwrap())
    });
}

criterion_group!(benches, construction, refinement, evaluation);
criterion_main!(benches);
