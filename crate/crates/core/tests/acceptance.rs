//! Acceptance criteria, one PASS/FAIL line each. Tolerances are pinned here.
//!
//! Run with `cargo test -p c1quintic --test acceptance`; the process exits non-zero if any
//! criterion fails. `ACCEPTANCE_ONLY=k` runs criterion `k` alone.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use c1quintic::assembly::{error_norms, Discretization};
use c1quintic::bernstein::{index, multi_indices, BBPoly, Jet2, Triangle, Vec2};
use c1quintic::mesh::Simplex;
use c1quintic::problems::{builtin_problem, ProblemId};
use c1quintic::solver::{
    cofactor, linearize_ma, multilevel_run, poisson_initial_guess, rate, NewtonOptions, RunReport,
};
use c1quintic::space::jets::quartic_ring_from_product;
use c1quintic::space::{quasi_interpolate, SplineSpace};
use common::*;
use nalgebra::{DMatrix, DVector, Matrix2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: Option<f64>, target: f64, tol: f64) -> bool {
    x.is_some_and(|x| (x - target).abs() <= tol)
}

fn in_range(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|x| (lo..=hi).contains(&x))
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("-".into(), |x| format!("{x:.2}"))
}

fn run(id: ProblemId, levels: usize) -> (RunReport, Duration) {
    let t = Instant::now();
    let p = builtin_problem(id).unwrap();
    let (r, _) = multilevel_run(&p, levels, &NewtonOptions::default()).unwrap();
    (r, t.elapsed())
}

/// Rate of a norm between levels `l − 1` and `l` (1-based).
fn level_rate(r: &RunReport, l: usize, f: impl Fn(&c1quintic::solver::LevelReport) -> Option<f64>) -> Option<f64> {
    rate(f(&r.levels[l - 2]), f(&r.levels[l - 1]))
}

fn space_correctness() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut checks = Duration::ZERO;
    for name in ["disk", "ellipse"] {
        for level in [1, 2] {
            let mesh = mesh_at_level(name, level);
            let t = Instant::now();
            let space = Arc::new(SplineSpace::new(mesh.clone()).unwrap());
            let d = random_space_defects(&space, 100, 41 + level as u64);
            checks += t.elapsed();
            let (oracle, gap) = rank_oracle(&mesh);
            let ok = d.c0 <= 1e-10
                && d.c1 <= 1e-10
                && d.c1_bb <= 1e-10
                && d.boundary <= 1e-10
                && d.duality <= 1e-12
                && oracle == space.dim()
                && gap > 1e8;
            pass &= ok;
            lines.push(format!(
                "{name} L{level}: dim {} oracle {oracle}, C0 {:.0e} C1 {:.0e} bd {:.0e} dual {:.0e}",
                space.dim(),
                d.c0,
                d.c1.max(d.c1_bb),
                d.boundary,
                d.duality
            ));
        }
    }
    pass &= checks <= Duration::from_secs(60);
    check(
        pass,
        format!("{}; checks {:.1}s", lines.join("; "), checks.as_secs_f64()),
    )
}

/// Values of `f` at the degree-`d` domain points of `tri`, turned into BB coefficients.
fn interpolate_bb(tri: Triangle, d: usize, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
    let pts = multi_indices(d);
    let n = pts.len();
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let mut unit = BBPoly::zero(tri, d);
    for (r, e) in pts.iter().enumerate() {
        let b = e.map(|k| k as f64 / d as f64);
        rhs[r] = f(tri.point(b));
        for c in 0..n {
            unit.coeffs[c] = 1.0;
            a[(r, c)] = unit.value_at(b);
            unit.coeffs[c] = 0.0;
        }
    }
    a.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

fn ring(d: usize) -> [usize; 6] {
    [
        [d, 0, 0],
        [d - 1, 1, 0],
        [d - 1, 0, 1],
        [d - 2, 2, 0],
        [d - 2, 1, 1],
        [d - 2, 0, 2],
    ]
    .map(|e| index(d, e))
}

fn ring_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let tri = Triangle::new(
            Vec2::new(rng.random_range(-1.0..0.0), rng.random_range(-1.0..0.0)),
            Vec2::new(rng.random_range(1.0..2.0), rng.random_range(-0.5..0.5)),
            Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(1.0..2.0)),
        );
        let p = BBPoly::new(tri, 4, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        // q(v1) = 1, q(v2) = q(v3) = 0
        let qc: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let q = BBPoly::new(tri, 2, vec![1.0, qc[0], qc[1], 0.0, qc[2], 0.0]).unwrap();
        let a = interpolate_bb(tri, 6, |x| p.value(x) * q.value(x));
        let c = quartic_ring_from_product(ring(6).map(|i| a[i]), qc[0], qc[1], qc[2]);
        for (k, i) in ring(4).into_iter().enumerate() {
            worst = worst.max((c[k] - p.coeffs[i]).abs());
        }
    }
    let el = start.elapsed();
    check(
        worst <= 1e-12 && el <= Duration::from_secs(1),
        format!("1000 cases, max error {worst:.1e}, {:.3}s", el.as_secs_f64()),
    )
}

fn table1() -> Outcome {
    let (r, el) = run(ProblemId::Disk, 4);
    let e = |l: usize, f: fn(&c1quintic::assembly::Norms) -> f64| level_rate(&r, l, |x| x.error.map(|n| f(&n)));
    let rates = [e(4, |n| n.l2), e(4, |n| n.h1), e(4, |n| n.h2)];
    let l3 = r.levels[2].error.unwrap().l2;
    let m: Vec<usize> = r.levels.iter().map(|l| l.iterations).collect();
    let pass = within(rates[0], 5.6, 0.7)
        && within(rates[1], 4.7, 0.7)
        && within(rates[2], 3.8, 0.7)
        && l3 >= 6.79e-10
        && l3 <= 6.79e-8
        && m[0] <= 3
        && m[1..].iter().all(|&k| k <= 2)
        && el <= Duration::from_secs(600);
    check(
        pass,
        format!(
            "L4 rates {} {} {}, L3 L2 error {l3:.2e}, m {m:?}, {:.0}s",
            fmt(rates[0]),
            fmt(rates[1]),
            fmt(rates[2]),
            el.as_secs_f64()
        ),
    )
}

fn table2() -> Outcome {
    let (r, el) = run(ProblemId::EllipseExp, 4);
    let rr = level_rate(&r, 4, |l| Some(l.residual));
    let eps = [
        level_rate(&r, 2, |l| l.eps.map(|n| n.l2)),
        level_rate(&r, 3, |l| l.eps.map(|n| n.l2)),
    ];
    let pass =
        within(rr, 3.8, 0.7) && eps.iter().any(|&x| x.is_some_and(|x| x >= 4.5)) && el <= Duration::from_secs(600);
    check(
        pass,
        format!(
            "R1 {:.2e}, L4 R rate {}, eps L2 rates L2/L3 {} {}, {:.0}s",
            r.levels[0].residual,
            fmt(rr),
            fmt(eps[0]),
            fmt(eps[1]),
            el.as_secs_f64()
        ),
    )
}

fn table3() -> Outcome {
    let (r, el) = run(ProblemId::EllipseSin, 5);
    let h2 = level_rate(&r, 4, |l| l.eps.map(|n| n.h2));
    let rr = level_rate(&r, 4, |l| Some(l.residual));
    check(
        in_range(h2, 1.0, 2.2) && in_range(rr, 1.2, 1.8),
        format!(
            "L4 eps H2 rate {}, R rate {}, {:.0}s",
            fmt(h2),
            fmt(rr),
            el.as_secs_f64()
        ),
    )
}

fn table4() -> Outcome {
    let (r, el) = run(ProblemId::C2Domain, 4);
    let l2 = level_rate(&r, 3, |l| l.eps.map(|n| n.l2));
    let h2 = level_rate(&r, 3, |l| l.eps.map(|n| n.h2));
    check(
        l2.is_some_and(|x| x >= 3.3) && in_range(h2, 1.5, 2.5),
        format!("L3 eps rates L2 {} H2 {}, {:.0}s", fmt(l2), fmt(h2), el.as_secs_f64()),
    )
}

fn det(h: &Matrix2<f64>) -> f64 {
    h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]
}

fn linearization() -> Outcome {
    // the Newton coefficient at quadrature points of a spline iterate against a
    // finite-difference derivative of det ∇² along the (normalized) Hessian of a random
    // spline
    let p = builtin_problem(ProblemId::Disk).unwrap();
    let space = Arc::new(SplineSpace::new(p.mesh.clone()).unwrap());
    let disc = Discretization::new(space.clone()).unwrap();
    let u = quasi_interpolate(&space, &c1quintic::problems::disk_solution).unwrap();
    let mut rng = StdRng::seed_from_u64(9);
    let v = random_spline(&space, &mut rng);
    let lin = linearize_ma(&u, p.g.clone());
    let t = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let tri = rng.random_range(0..space.mesh.n_triangles());
        let q = &disc.rules[tri][rng.random_range(0..disc.rules[tri].len())];
        let hu = u.patch(tri).jet_at(q.bary).hess;
        let hv = v.patch(tri).jet_at(q.bary).hess;
        let hv = hv / hv.norm();
        let fd = (det(&(hu + hv * t)) - det(&hu)) / t;
        let a = lin.coefficients(tri, q).a;
        let exact = a.component_mul(&hv).sum();
        // relative to the norm of the derivative, since cof(H):V may cancel
        worst = worst.max((fd - exact).abs() / a.norm());
    }
    // quadratic u and v: det(H + tK) = det H + t cof(H):K + t² det K
    let mut identity = 0.0f64;
    for _ in 0..100 {
        let s = |rng: &mut StdRng| {
            let (a, b, c) = (
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            Matrix2::new(a, b, b, c)
        };
        let (h, k) = (s(&mut rng), s(&mut rng));
        let t = rng.random_range(-1.0..1.0);
        let lhs = det(&(h + k * t));
        let rhs = det(&h) + t * cofactor(&h).component_mul(&k).sum() + t * t * det(&k);
        identity = identity.max((lhs - rhs).abs());
    }
    check(
        worst <= 1e-4 && identity <= 1e-13,
        format!("50 points, FD relative error {worst:.1e}; quadratic identity {identity:.1e}"),
    )
}

fn geometry() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (id, want) in [(ProblemId::Disk, PI), (ProblemId::EllipseExp, 0.4 * PI)] {
        let p = builtin_problem(id).unwrap();
        let disc = Discretization::new(Arc::new(SplineSpace::new(p.mesh).unwrap())).unwrap();
        let rel = (disc.area() - want).abs() / want;
        pass &= rel <= 1e-9;
        parts.push(format!("{} area rel error {rel:.1e}", id.mesh_name()));
    }
    let space = Arc::new(SplineSpace::new(mesh_at_level("disk", 2)).unwrap());
    let disc = Discretization::new(space).unwrap();
    let u = poisson_initial_guess(&disc, Arc::new(|_| 1.0)).unwrap();
    let e = error_norms(&disc, &u, |x| Jet2 {
        value: 0.5 * (x.norm_squared() - 1.0),
        grad: x,
        hess: Matrix2::identity(),
    });
    pass &= e.l2 <= 1e-9;
    parts.push(format!("Poisson L2 error {:.1e}", e.l2));
    check(pass, parts.join(", "))
}

fn locality() -> Outcome {
    let mut worst = 0;
    let mut n = 0;
    for (name, level) in [("disk", 1), ("disk", 2), ("ellipse", 1), ("ellipse", 2)] {
        let space = Arc::new(SplineSpace::new(mesh_at_level(name, level)).unwrap());
        for (k, d) in space.mds.dofs.iter().enumerate() {
            let star = space.star(&[Simplex::Triangle(d.triangle)], 3);
            let outside = basis_footprint(&space, k, 0.0)
                .into_iter()
                .filter(|t| !star.contains(t))
                .count();
            worst = worst.max(outside);
            n += 1;
        }
    }
    check(
        worst == 0,
        format!("{n} basis functions, max triangles outside st3(T): {worst}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("space correctness", space_correctness),
        ("interior ring round trip", ring_round_trip),
        ("disk convergence", table1),
        ("ellipse exp(x1) convergence", table2),
        ("ellipse sin density convergence", table3),
        ("C2 domain convergence", table4),
        ("linearization", linearization),
        ("geometry and quadrature", geometry),
        ("locality", locality),
    ];
    let mut failed = 0;
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let o = f();
        println!(
            "{} {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
