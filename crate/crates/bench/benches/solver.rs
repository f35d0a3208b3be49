use std::sync::Arc;

use c1quintic::assembly::{assemble, Discretization};
use c1quintic::problems::{builtin_problem, ProblemId};
use c1quintic::solver::{linearize_ma, newton_solve, poisson_initial_guess, NewtonOptions};
use c1quintic_bench::space;
use criterion::{criterion_group, criterion_main, Criterion};

fn newton(c: &mut Criterion) {
    let p = builtin_problem(ProblemId::Disk).unwrap();
    let disc = Discretization::new(space("disk", 2)).unwrap();
    let u0 = poisson_initial_guess(&disc, p.g.clone()).unwrap();
    let mut g = c.benchmark_group("disk level 2");
    g.sample_size(10);
    g.bench_function("assemble Newton system", |b| {
        b.iter(|| assemble(&linearize_ma(&u0, p.g.clone()), &disc))
    });
    let sys = assemble(&linearize_ma(&u0, p.g.clone()), &disc);
    g.bench_function("sparse solve", |b| b.iter(|| disc.solve(&sys).unwrap()));
    g.bench_function("Newton to tolerance", |b| {
        b.iter(|| newton_solve(&disc, u0.clone(), p.g.clone(), &NewtonOptions::default()).unwrap())
    });
    g.finish();
}

fn discretization(c: &mut Criterion) {
    let s = space("ellipse", 2);
    let mut g = c.benchmark_group("ellipse level 2");
    g.sample_size(10);
    g.bench_function("quadrature rules", |b| {
        b.iter(|| Discretization::new(Arc::clone(&s)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, newton, discretization);
criterion_main!(benches);
