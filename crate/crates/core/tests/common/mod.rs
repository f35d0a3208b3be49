//! Independent oracles shared by the integration tests.
//!
//! The rank oracle parametrizes every patch by raw coefficients (degree 5 on ordinary
//! triangles, 6 on buffers, `q · p` with a quartic `p` on pies), imposes C⁰/C¹ across interior
//! edges by sampling values and normal derivatives along each edge and C² at interior
//! vertices by equating Hessians, and returns the nullity of the resulting constraint matrix
//! from a dense SVD.
//! It never touches the determining-set construction.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use c1quintic::bernstein::{c1_defect, degree_raise, dim, index, BBPoly, Jet2, Vec2};
use c1quintic::mesh::{refine_uniform, CurvedTriangulation, TriClass};
use c1quintic::problems::builtin_mesh;
use c1quintic::space::{SplineFunction, SplineSpace};
use nalgebra::{DMatrix, Matrix2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Level-`level` mesh of a built-in domain (level 1 is the shipped mesh).
pub fn mesh_at_level(name: &str, level: usize) -> CurvedTriangulation {
    let mut m = builtin_mesh(name).unwrap();
    for _ in 1..level {
        m = refine_uniform(&m).unwrap();
    }
    m
}

struct Layout {
    offset: Vec<usize>,
    count: Vec<usize>,
    total: usize,
}

fn layout(mesh: &CurvedTriangulation) -> Layout {
    let mut offset = Vec::new();
    let mut count = Vec::new();
    let mut total = 0;
    for t in 0..mesh.n_triangles() {
        let n = match mesh.class(t) {
            TriClass::Ordinary => dim(5),
            TriClass::Buffer => dim(6),
            TriClass::Pie => dim(4),
        };
        offset.push(total);
        count.push(n);
        total += n;
    }
    Layout { offset, count, total }
}

/// Jets at `x` of the raw unknowns of triangle `t`.
fn unknown_jets(mesh: &CurvedTriangulation, t: usize, x: Vec2) -> Vec<Jet2> {
    let tri = mesh.chord_triangle(t);
    let b = tri.barycentric_unchecked(x);
    let (degree, conic) = match mesh.class(t) {
        TriClass::Ordinary => (5, None),
        TriClass::Buffer => (6, None),
        TriClass::Pie => {
            let arc = mesh.triangles[t].arc.unwrap();
            (4, Some(mesh.domain.arcs[arc].conic))
        }
    };
    let mut unit = BBPoly::zero(tri, degree);
    (0..dim(degree))
        .map(|i| {
            unit.coeffs[i] = 1.0;
            let p = unit.jet_at(b);
            unit.coeffs[i] = 0.0;
            match conic {
                None => p,
                Some(q) => {
                    let (qv, qg, qh) = (q.eval(x), q.grad(x), q.hessian());
                    Jet2 {
                        value: qv * p.value,
                        grad: p.grad * qv + qg * p.value,
                        hess: qh * p.value + p.grad * qg.transpose() + qg * p.grad.transpose() + p.hess * qv,
                    }
                }
            }
        })
        .collect()
}

type Row = Vec<(usize, f64)>;

fn row(l: &Layout, t: usize, s: usize, a: &[f64], b: &[f64]) -> Row {
    let mut r: Row = a.iter().enumerate().map(|(i, &v)| (l.offset[t] + i, v)).collect();
    r.extend(b.iter().enumerate().map(|(i, &v)| (l.offset[s] + i, -v)));
    // Bernstein polynomials evaluated where they vanish leave round-off; drop it so that
    // column equilibration does not promote it to a constraint
    let m = r.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
    r.retain(|e| e.1.abs() > 1e-13 * m);
    r
}

/// Constraint rows, normalized to unit max norm, and the number of unknowns.
pub fn constraints(mesh: &CurvedTriangulation) -> (Vec<Row>, usize) {
    let l = layout(mesh);
    let mut rows = Vec::new();
    for e in &mesh.edges {
        let (Some(t), Some(s)) = (e.tris[0], e.tris[1]) else {
            continue;
        };
        let (a, b) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
        let d = b - a;
        let n = Vec2::new(-d.y, d.x);
        for k in 0..7 {
            let x = a + d * ((k as f64 + 0.5) / 7.0);
            let jt = unknown_jets(mesh, t, x);
            let js = unknown_jets(mesh, s, x);
            let vt: Vec<f64> = jt.iter().map(|j| j.value).collect();
            let vs: Vec<f64> = js.iter().map(|j| j.value).collect();
            rows.push(row(&l, t, s, &vt, &vs));
            let nt: Vec<f64> = jt.iter().map(|j| j.grad.dot(&n)).collect();
            let ns: Vec<f64> = js.iter().map(|j| j.grad.dot(&n)).collect();
            rows.push(row(&l, t, s, &nt, &ns));
        }
    }
    for v in 0..mesh.n_vertices() {
        if mesh.on_boundary[v] {
            continue;
        }
        let x = mesh.vertices[v];
        let tris = &mesh.vertex_tris[v];
        let hess: HashMap<usize, Vec<Matrix2<f64>>> = tris
            .iter()
            .map(|&t| (t, unknown_jets(mesh, t, x).into_iter().map(|j| j.hess).collect()))
            .collect();
        for (i, &t) in tris.iter().enumerate() {
            for &s in &tris[i + 1..] {
                let shares_edge = mesh.triangles[t]
                    .v
                    .iter()
                    .filter(|w| mesh.triangles[s].v.contains(w))
                    .count()
                    == 2;
                if !shares_edge {
                    continue;
                }
                for (p, q) in [(0, 0), (0, 1), (1, 1)] {
                    let ht: Vec<f64> = hess[&t].iter().map(|h| h[(p, q)]).collect();
                    let hs: Vec<f64> = hess[&s].iter().map(|h| h[(p, q)]).collect();
                    rows.push(row(&l, t, s, &ht, &hs));
                }
            }
        }
    }
    // equilibrate columns, then rows; rank is unchanged and near-zero singular values
    // are not confused with constraints on weakly scaled unknowns (pie factors carry q)
    let mut colmax = vec![0.0f64; l.total];
    for r in &rows {
        for &(c, v) in r {
            colmax[c] = colmax[c].max(v.abs());
        }
    }
    for r in rows.iter_mut() {
        r.iter_mut().for_each(|e| e.1 /= colmax[e.0]);
        let m = r.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
        r.iter_mut().for_each(|e| e.1 /= m);
    }
    (rows, l.total)
}

/// Number of singular values `sv` that count as nonzero relative to `scale`.
///
/// The cut is placed at the widest gap between consecutive values in the window where
/// kept values exceed `1e-13` and dropped ones are below `1e-3` (both relative).
fn numerical_rank(sv: &[f64], scale: f64) -> (usize, f64) {
    let mut s: Vec<f64> = sv.iter().map(|x| (x / scale.max(1e-300)).max(1e-20)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let n = s.len();
    let at = |k: usize| if k >= n { 1e-20 } else { s[k] };
    let mut best = (n, 0.0);
    for k in 1..=n {
        let (above, below) = (s[k - 1], at(k));
        if above > 1e-13 && below < 1e-3 && above / below > best.1 {
            best = (k, above / below);
        }
    }
    best
}

/// Nullity of the constraint system from one dense SVD, with the width of the spectral gap
/// at the cut.
pub fn rank_oracle(mesh: &CurvedTriangulation) -> (usize, f64) {
    let (rows, n) = constraints(mesh);
    let mut a = DMatrix::<f64>::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        for &(c, v) in r {
            a[(i, c)] += v;
        }
    }
    let sv = a.singular_values();
    let (rank, gap) = numerical_rank(sv.as_slice(), sv.max());
    (n - rank, gap)
}

/// Sample points along the curved side of pie triangle `t`.
pub fn arc_samples(mesh: &CurvedTriangulation, t: usize, n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|i| mesh.pie_point(t, 1.0, (i as f64 + 0.5) / n as f64).unwrap().0)
        .collect()
}

/// Worst defects of one batch of random splines, each relative to the largest dof.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpaceDefects {
    /// Value jumps across interior edges, sampled.
    pub c0: f64,
    /// Gradient jumps across interior edges, sampled and scaled by the edge length.
    pub c1: f64,
    /// C¹ conditions on BB coefficients after raising both patches to degree 6.
    pub c1_bb: f64,
    /// Hessian jumps at interior vertices, scaled by the squared local mesh size.
    pub c2: f64,
    /// Values on the curved boundary.
    pub boundary: f64,
    /// Dofs read back from the pieces minus the dofs put in.
    pub duality: f64,
}

impl SpaceDefects {
    fn max(self, o: Self) -> Self {
        Self {
            c0: self.c0.max(o.c0),
            c1: self.c1.max(o.c1),
            c1_bb: self.c1_bb.max(o.c1_bb),
            c2: self.c2.max(o.c2),
            boundary: self.boundary.max(o.boundary),
            duality: self.duality.max(o.duality),
        }
    }
}

pub fn random_spline(space: &Arc<SplineSpace>, rng: &mut StdRng) -> SplineFunction {
    let dofs = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    SplineFunction::new(space.clone(), dofs).unwrap()
}

/// Quartic factor of pie triangle `t`, recovered from values `f / q` at the 15 interior
/// domain points of degree 7 (where `q` does not vanish).
fn recovered_quartic(f: &SplineFunction, t: usize) -> Vec<f64> {
    let space = &f.space;
    let tri = space.mesh.chord_triangle(t);
    let q = BBPoly::new(tri, 2, space.pie_q[t].unwrap().to_vec()).unwrap();
    let pts: Vec<[f64; 3]> = c1quintic::bernstein::multi_indices(4)
        .into_iter()
        .map(|e| e.map(|k| (k + 1) as f64 / 7.0))
        .collect();
    let mut a = DMatrix::zeros(15, 15);
    let mut rhs = nalgebra::DVector::zeros(15);
    let mut unit = BBPoly::zero(tri, 4);
    for (r, b) in pts.iter().enumerate() {
        rhs[r] = f.patch(t).value_at(*b) / q.value_at(*b);
        for c in 0..15 {
            unit.coeffs[c] = 1.0;
            a[(r, c)] = unit.value_at(*b);
            unit.coeffs[c] = 0.0;
        }
    }
    a.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

/// Defects of one spline.
pub fn spline_defects(f: &SplineFunction) -> SpaceDefects {
    let space = &f.space;
    let mesh = &space.mesh;
    let scale = f.dofs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut d = SpaceDefects::default();
    for e in &mesh.edges {
        let (Some(t), Some(s)) = (e.tris[0], e.tris[1]) else {
            continue;
        };
        let (a, b) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
        let h = (b - a).norm();
        for k in 0..=10 {
            let x = a + (b - a) * (k as f64 / 10.0);
            let (jt, js) = (f.patch(t).jet(x), f.patch(s).jet(x));
            d.c0 = d.c0.max((jt.value - js.value).abs() / scale);
            d.c1 = d.c1.max((jt.grad - js.grad).norm() * h / scale);
        }
        let (pt, ps) = (
            degree_raise(f.patch(t), 6).unwrap(),
            degree_raise(f.patch(s), 6).unwrap(),
        );
        let rel = pt.max_abs().max(ps.max_abs()) / scale;
        d.c1_bb = d.c1_bb.max(c1_defect(&pt, &ps).unwrap() * rel);
    }
    for v in mesh.interior_vertices() {
        let x = mesh.vertices[v];
        let tris = &mesh.vertex_tris[v];
        let h = tris.iter().map(|&t| mesh.chord_triangle(t).scale()).fold(0.0, f64::max);
        let h0 = f.patch(tris[0]).jet(x).hess;
        for &t in &tris[1..] {
            d.c2 = d.c2.max((f.patch(t).jet(x).hess - h0).abs().max() * h * h / scale);
        }
    }
    for t in mesh.triangles_of(TriClass::Pie) {
        for x in arc_samples(mesh, t, 12) {
            d.boundary = d.boundary.max(f.patch(t).value(x).abs() / scale);
        }
    }
    let quartics: HashMap<usize, Vec<f64>> = mesh
        .triangles_of(TriClass::Pie)
        .into_iter()
        .map(|t| (t, recovered_quartic(f, t)))
        .collect();
    for (k, dof) in space.mds.dofs.iter().enumerate() {
        let t = dof.triangle;
        let read = if dof.on_quartic_factor() {
            quartics[&t][index(4, dof.point.0)]
        } else {
            f.patch(t).coeff(dof.point.0)
        };
        d.duality = d.duality.max((read - f.dofs[k]).abs() / scale);
    }
    d
}

/// Worst defects over `n` random splines.
pub fn random_space_defects(space: &Arc<SplineSpace>, n: usize, seed: u64) -> SpaceDefects {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).fold(SpaceDefects::default(), |acc, _| {
        acc.max(spline_defects(&random_spline(space, &mut rng)))
    })
}

/// Triangles where the basis function of dof `k` has a coefficient above `tol`, found by
/// building the spline with that single dof set.
pub fn basis_footprint(space: &Arc<SplineSpace>, k: usize, tol: f64) -> Vec<usize> {
    let mut dofs = vec![0.0; space.dim()];
    dofs[k] = 1.0;
    let f = SplineFunction::new(space.clone(), dofs).unwrap();
    (0..space.mesh.n_triangles())
        .filter(|&t| f.patch(t).max_abs() > tol)
        .collect()
}
