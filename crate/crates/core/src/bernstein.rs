//! Bernstein–Bézier algebra on triangles.
//!
//! Coefficients of a degree-`d` polynomial are stored in lexicographic order of the
//! multi-index `(i, j, k)`, descending in `i` and then in `j`:
//! `(d,0,0), (d-1,1,0), (d-1,0,1), (d-2,2,0), (d-2,1,1), (d-2,0,2), ...`.
//! This ordering is part of the spline file format.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Highest polynomial degree supported by the factorial tables.
pub const MAX_DEGREE: usize = 10;

const FACTORIAL: [f64; MAX_DEGREE + 1] = [
    1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0,
];

/// Number of BB coefficients of a bivariate polynomial of degree `d`.
pub const fn dim(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Multinomial coefficient `d! / (i! j! k!)`.
pub fn multinomial(e: [usize; 3]) -> f64 {
    FACTORIAL[e[0] + e[1] + e[2]] / (FACTORIAL[e[0]] * FACTORIAL[e[1]] * FACTORIAL[e[2]])
}

/// Position of the multi-index `e` (with `|e| = d`) in lexicographic order.
#[inline]
pub fn index(d: usize, e: [usize; 3]) -> usize {
    debug_assert_eq!(e[0] + e[1] + e[2], d);
    let n = d - e[0];
    n * (n + 1) / 2 + (n - e[1])
}

/// All multi-indices of degree `d` in storage order.
pub fn multi_indices(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(dim(d));
    for i in (0..=d).rev() {
        for j in (0..=d - i).rev() {
            out.push([i, j, d - i - j]);
        }
    }
    out
}

/// A domain point `ξ_{ijk}` of some degree, identified by its multi-index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DomainPointIndex(pub [usize; 3]);

impl DomainPointIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn position(&self) -> usize {
        index(self.degree(), self.0)
    }

    pub fn from_position(d: usize, pos: usize) -> Self {
        Self(multi_indices(d)[pos])
    }

    /// The point `(i v1 + j v2 + k v3) / d`.
    pub fn point(&self, tri: &Triangle) -> Vec2 {
        let d = self.degree() as f64;
        (tri.v[0] * self.0[0] as f64 + tri.v[1] * self.0[1] as f64 + tri.v[2] * self.0[2] as f64) / d
    }
}

/// The six domain points of degree `d` closest to vertex `slot` (0-based), in the order
/// `ξ_{d,0,0}, ξ_{d-1,1,0}, ξ_{d-1,0,1}, ξ_{d-2,2,0}, ξ_{d-2,0,2}, ξ_{d-2,1,1}` written
/// relative to that vertex. The remaining two slots keep their cyclic-free natural order.
pub fn d2_ring(d: usize, slot: usize) -> [DomainPointIndex; 6] {
    assert!(d >= 2 && slot < 3);
    let (a, b) = other_slots(slot);
    let mk = |p: usize, q: usize, r: usize| {
        let mut e = [0; 3];
        e[slot] = p;
        e[a] = q;
        e[b] = r;
        DomainPointIndex(e)
    };
    [
        mk(d, 0, 0),
        mk(d - 1, 1, 0),
        mk(d - 1, 0, 1),
        mk(d - 2, 2, 0),
        mk(d - 2, 0, 2),
        mk(d - 2, 1, 1),
    ]
}

/// The two slots different from `slot`, in increasing order.
pub fn other_slots(slot: usize) -> (usize, usize) {
    match slot {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => panic!("slot {slot} out of range"),
    }
}

/// Value, gradient and Hessian of a function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Matrix2<f64>,
}

impl Jet2 {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            grad: Vec2::zeros(),
            hess: Matrix2::zeros(),
        }
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        Jet2 {
            value: self.value - rhs.value,
            grad: self.grad - rhs.grad,
            hess: self.hess - rhs.hess,
        }
    }
}

/// A non-degenerate straight triangle `<v1, v2, v3>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub v: [Vec2; 3],
}

impl Triangle {
    pub fn new(a: Vec2, b: Vec2, c: Vec2) -> Self {
        Self { v: [a, b, c] }
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * cross(self.v[1] - self.v[0], self.v[2] - self.v[0])
    }

    /// Longest edge length.
    pub fn scale(&self) -> f64 {
        (self.v[1] - self.v[0])
            .norm()
            .max((self.v[2] - self.v[1]).norm())
            .max((self.v[0] - self.v[2]).norm())
    }

    pub fn check(&self) -> Result<()> {
        let area = self.signed_area();
        let s = self.scale();
        if !(area.abs() >= 1e-14 * s * s) || s == 0.0 {
            return Err(Error::DegenerateTriangle { area });
        }
        Ok(())
    }

    /// Barycentric coordinates of `x`; points outside the triangle get negative entries.
    pub fn barycentric(&self, x: Vec2) -> Result<[f64; 3]> {
        self.check()?;
        Ok(self.barycentric_unchecked(x))
    }

    #[inline]
    pub fn barycentric_unchecked(&self, x: Vec2) -> [f64; 3] {
        let e1 = self.v[1] - self.v[0];
        let e2 = self.v[2] - self.v[0];
        let r = x - self.v[0];
        let det = cross(e1, e2);
        let b2 = cross(r, e2) / det;
        let b3 = cross(e1, r) / det;
        [1.0 - b2 - b3, b2, b3]
    }

    /// Directional (barycentric) coordinates of a vector; they sum to zero.
    pub fn direction_coords(&self, u: Vec2) -> [f64; 3] {
        let e1 = self.v[1] - self.v[0];
        let e2 = self.v[2] - self.v[0];
        let det = cross(e1, e2);
        let a2 = cross(u, e2) / det;
        let a3 = cross(e1, u) / det;
        [-a2 - a3, a2, a3]
    }

    /// Cartesian gradients of the three barycentric coordinate functions.
    pub fn bary_gradients(&self) -> [Vec2; 3] {
        let ex = self.direction_coords(Vec2::new(1.0, 0.0));
        let ey = self.direction_coords(Vec2::new(0.0, 1.0));
        [
            Vec2::new(ex[0], ey[0]),
            Vec2::new(ex[1], ey[1]),
            Vec2::new(ex[2], ey[2]),
        ]
    }

    pub fn point(&self, b: [f64; 3]) -> Vec2 {
        self.v[0] * b[0] + self.v[1] * b[1] + self.v[2] * b[2]
    }

    pub fn centroid(&self) -> Vec2 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// One de Casteljau step: degree `m` coefficients to degree `m - 1`, in place.
#[inline]
fn de_casteljau_step(c: &mut [f64], m: usize, w: [f64; 3]) {
    let mut out = 0;
    for i in (0..m).rev() {
        let np = m - 1 - i;
        let base = (np + 1) * (np + 2) / 2 + np;
        for j in (0..=np).rev() {
            let hi = base - j;
            c[out] = w[0] * c[out] + w[1] * c[hi] + w[2] * c[hi + 1];
            out += 1;
        }
    }
}

/// Barycentric polynomial in BB-form over a triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct BBPoly {
    pub tri: Triangle,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl BBPoly {
    pub fn new(tri: Triangle, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::DegreeTooLarge(degree));
        }
        if coeffs.len() != dim(degree) {
            return Err(Error::Input(format!(
                "degree {degree} needs {} coefficients, got {}",
                dim(degree),
                coeffs.len()
            )));
        }
        Ok(Self { tri, degree, coeffs })
    }

    pub fn zero(tri: Triangle, degree: usize) -> Self {
        Self {
            tri,
            degree,
            coeffs: vec![0.0; dim(degree)],
        }
    }

    pub fn coeff(&self, e: [usize; 3]) -> f64 {
        self.coeffs[index(self.degree, e)]
    }

    /// Value at barycentric coordinates `b` by de Casteljau.
    pub fn value_at(&self, b: [f64; 3]) -> f64 {
        let mut c = self.coeffs.clone();
        for m in (1..=self.degree).rev() {
            de_casteljau_step(&mut c, m, b);
        }
        c[0]
    }

    /// Mixed directional derivative `D_{u1} ... D_{ur} p` at `b`, where each direction is
    /// given in directional barycentric coordinates.
    pub fn directional_at(&self, b: [f64; 3], dirs: &[[f64; 3]]) -> f64 {
        let d = self.degree;
        let r = dirs.len();
        if r > d {
            return 0.0;
        }
        let mut c = self.coeffs.clone();
        let mut m = d;
        let mut factor = 1.0;
        for a in dirs {
            factor *= m as f64;
            de_casteljau_step(&mut c, m, *a);
            m -= 1;
        }
        while m > 0 {
            de_casteljau_step(&mut c, m, b);
            m -= 1;
        }
        factor * c[0]
    }

    pub fn gradient_at(&self, b: [f64; 3]) -> Vec2 {
        let ax = self.tri.direction_coords(Vec2::new(1.0, 0.0));
        let ay = self.tri.direction_coords(Vec2::new(0.0, 1.0));
        Vec2::new(self.directional_at(b, &[ax]), self.directional_at(b, &[ay]))
    }

    pub fn hessian_at(&self, b: [f64; 3]) -> Matrix2<f64> {
        let ax = self.tri.direction_coords(Vec2::new(1.0, 0.0));
        let ay = self.tri.direction_coords(Vec2::new(0.0, 1.0));
        let xx = self.directional_at(b, &[ax, ax]);
        let xy = self.directional_at(b, &[ax, ay]);
        let yy = self.directional_at(b, &[ay, ay]);
        Matrix2::new(xx, xy, xy, yy)
    }

    /// Value, gradient and Hessian at barycentric coordinates `b`.
    pub fn jet_at(&self, b: [f64; 3]) -> Jet2 {
        let d = self.degree;
        let mut c = self.coeffs.clone();
        // Reduce to degree 2 at b, then differentiate the quadratic.
        let mut m = d;
        while m > 2 {
            de_casteljau_step(&mut c, m, b);
            m -= 1;
        }
        if d < 2 {
            return match d {
                0 => Jet2 {
                    value: c[0],
                    ..Jet2::zero()
                },
                _ => {
                    let g = self.gradient_at(b);
                    Jet2 {
                        value: self.value_at(b),
                        grad: g,
                        hess: Matrix2::zeros(),
                    }
                }
            };
        }
        let ax = self.tri.direction_coords(Vec2::new(1.0, 0.0));
        let ay = self.tri.direction_coords(Vec2::new(0.0, 1.0));
        let q = [c[0], c[1], c[2], c[3], c[4], c[5]];
        // polar form of the remaining quadratic
        let blossom = |u: [f64; 3], w: [f64; 3]| {
            q[0] * u[0] * w[0]
                + q[1] * (u[0] * w[1] + u[1] * w[0])
                + q[2] * (u[0] * w[2] + u[2] * w[0])
                + q[3] * u[1] * w[1]
                + q[4] * (u[1] * w[2] + u[2] * w[1])
                + q[5] * u[2] * w[2]
        };
        let df = (d * (d - 1)) as f64;
        let value = blossom(b, b);
        let gx = d as f64 * blossom(b, ax);
        let gy = d as f64 * blossom(b, ay);
        let hxx = df * blossom(ax, ax);
        let hxy = df * blossom(ax, ay);
        let hyy = df * blossom(ay, ay);
        Jet2 {
            value,
            grad: Vec2::new(gx, gy),
            hess: Matrix2::new(hxx, hxy, hxy, hyy),
        }
    }

    pub fn value(&self, x: Vec2) -> f64 {
        self.value_at(self.tri.barycentric_unchecked(x))
    }

    pub fn jet(&self, x: Vec2) -> Jet2 {
        self.jet_at(self.tri.barycentric_unchecked(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Degree-order-`r` evaluation: value (`r = 0`), gradient (`r = 1`) or Hessian (`r = 2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivative {
    Value(f64),
    Gradient(Vec2),
    Hessian(Matrix2<f64>),
}

pub fn eval_bb(p: &BBPoly, b: [f64; 3], order: usize) -> Derivative {
    match order {
        0 => Derivative::Value(p.value_at(b)),
        1 => Derivative::Gradient(p.gradient_at(b)),
        _ => Derivative::Hessian(p.hessian_at(b)),
    }
}

/// Coefficients of `p` rewritten at degree `degree + 1`.
pub fn raise_once(d: usize, c: &[f64]) -> Vec<f64> {
    let dn = d + 1;
    let inv = 1.0 / dn as f64;
    multi_indices(dn)
        .into_iter()
        .map(|[i, j, k]| {
            let mut s = 0.0;
            if i > 0 {
                s += i as f64 * c[index(d, [i - 1, j, k])];
            }
            if j > 0 {
                s += j as f64 * c[index(d, [i, j - 1, k])];
            }
            if k > 0 {
                s += k as f64 * c[index(d, [i, j, k - 1])];
            }
            s * inv
        })
        .collect()
}

pub fn degree_raise(p: &BBPoly, target: usize) -> Result<BBPoly> {
    if target < p.degree {
        return Err(Error::Input(format!("cannot raise degree {} to {target}", p.degree)));
    }
    if target > MAX_DEGREE {
        return Err(Error::DegreeTooLarge(target));
    }
    let mut c = p.coeffs.clone();
    for d in p.degree..target {
        c = raise_once(d, &c);
    }
    Ok(BBPoly {
        tri: p.tri,
        degree: target,
        coeffs: c,
    })
}

/// Weight of `p_α q_β` in the coefficient of `B^{d1+d2}_{α+β}` of the product.
pub fn product_weight(a: [usize; 3], b: [usize; 3]) -> f64 {
    let g = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    multinomial(a) * multinomial(b) / multinomial(g)
}

/// Coefficients of the product of two BB polynomials over the same triangle.
pub fn product_coeffs(d1: usize, p: &[f64], d2: usize, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim(d1 + d2)];
    let e2 = multi_indices(d2);
    for (pa, a) in multi_indices(d1).into_iter().enumerate() {
        if p[pa] == 0.0 {
            continue;
        }
        for (pb, b) in e2.iter().enumerate() {
            let g = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
            out[index(d1 + d2, g)] += product_weight(a, *b) * p[pa] * q[pb];
        }
    }
    out
}

pub fn bb_product(p: &BBPoly, q: &BBPoly) -> Result<BBPoly> {
    if !same_triangle(&p.tri, &q.tri) {
        return Err(Error::TriangleMismatch);
    }
    let d = p.degree + q.degree;
    if d > MAX_DEGREE {
        return Err(Error::DegreeTooLarge(d));
    }
    Ok(BBPoly {
        tri: p.tri,
        degree: d,
        coeffs: product_coeffs(p.degree, &p.coeffs, q.degree, &q.coeffs),
    })
}

fn same_triangle(a: &Triangle, b: &Triangle) -> bool {
    let tol = 1e-14 * a.scale().max(1.0);
    (0..3).all(|i| (a.v[i] - b.v[i]).norm() <= tol)
}

/// Values, gradients and Hessians of all degree-`d` Bernstein polynomials at `b`.
///
/// `bary_grads` are the Cartesian gradients of the barycentric coordinates of the
/// reference triangle. Outputs are resized to `dim(d)`.
pub fn basis_with_derivatives(
    d: usize,
    b: [f64; 3],
    bary_grads: &[Vec2; 3],
    values: &mut Vec<f64>,
    grads: &mut Vec<Vec2>,
    hess: &mut Vec<Matrix2<f64>>,
) {
    let n = dim(d);
    values.clear();
    grads.clear();
    hess.clear();
    let mut pw = [[1.0f64; MAX_DEGREE + 1]; 3];
    for m in 0..3 {
        for e in 1..=d {
            pw[m][e] = pw[m][e - 1] * b[m];
        }
    }
    let mono = |e: [isize; 3], deg: usize| -> f64 {
        if e.iter().any(|&x| x < 0) {
            return 0.0;
        }
        let u = [e[0] as usize, e[1] as usize, e[2] as usize];
        debug_assert_eq!(u[0] + u[1] + u[2], deg);
        multinomial(u) * pw[0][u[0]] * pw[1][u[1]] * pw[2][u[2]]
    };
    let df = d as f64;
    let dd = (d * d.saturating_sub(1)) as f64;
    for e in multi_indices(d) {
        let ei = [e[0] as isize, e[1] as isize, e[2] as isize];
        values.push(mono(ei, d));
        let mut g = Vec2::zeros();
        if d >= 1 {
            for m in 0..3 {
                let mut em = ei;
                em[m] -= 1;
                let v = mono(em, d - 1);
                if v != 0.0 {
                    g += bary_grads[m] * (df * v);
                }
            }
        }
        grads.push(g);
        let mut h = Matrix2::zeros();
        if d >= 2 {
            for m in 0..3 {
                for l in 0..3 {
                    let mut em = ei;
                    em[m] -= 1;
                    em[l] -= 1;
                    let v = mono(em, d - 2);
                    if v != 0.0 {
                        h += bary_grads[m] * bary_grads[l].transpose() * (dd * v);
                    }
                }
            }
        }
        hess.push(h);
    }
    debug_assert_eq!(values.len(), n);
}

/// Locates the shared edge of two triangles. Returns, for the first triangle, the slots of
/// the shared vertices `(a, b)` and its off-edge slot, and the same for the second triangle
/// (with matching vertex order).
pub fn shared_edge(t: &Triangle, s: &Triangle) -> Option<([usize; 3], [usize; 3])> {
    let tol = 1e-12 * t.scale().max(s.scale());
    let mut pairs = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if (t.v[i] - s.v[j]).norm() <= tol {
                pairs.push((i, j));
            }
        }
    }
    if pairs.len() != 2 {
        return None;
    }
    let (a, a2) = pairs[0];
    let (b, b2) = pairs[1];
    let o = 3 - a - b;
    let o2 = 3 - a2 - b2;
    Some(([a, b, o], [a2, b2, o2]))
}

fn exps(slots: [usize; 3], powers: [usize; 3]) -> [usize; 3] {
    let mut e = [0; 3];
    for m in 0..3 {
        e[slots[m]] = powers[m];
    }
    e
}

/// Largest violation of the C⁰ conditions across the common edge of `p` and `pt`,
/// relative to the largest coefficient involved. Degrees must agree.
pub fn c0_defect(p: &BBPoly, pt: &BBPoly) -> Result<f64> {
    let (sp, st) = shared_edge(&p.tri, &pt.tri).ok_or(Error::TriangleMismatch)?;
    if p.degree != pt.degree {
        return Err(Error::Input("smoothness check needs equal degrees".into()));
    }
    let d = p.degree;
    let scale = p.max_abs().max(pt.max_abs()).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for m in 0..=d {
        let c = p.coeff(exps(sp, [m, d - m, 0]));
        let ct = pt.coeff(exps(st, [m, d - m, 0]));
        worst = worst.max((c - ct).abs());
    }
    Ok(worst / scale)
}

/// Largest violation of the C¹ conditions across the common edge (the C⁰ part included).
pub fn c1_defect(p: &BBPoly, pt: &BBPoly) -> Result<f64> {
    let c0 = c0_defect(p, pt)?;
    let (sp, st) = shared_edge(&p.tri, &pt.tri).ok_or(Error::TriangleMismatch)?;
    let d = p.degree;
    let scale = p.max_abs().max(pt.max_abs()).max(f64::MIN_POSITIVE);
    // barycentric coordinates of pt's off-edge vertex relative to p's triangle
    let bz = p.tri.barycentric_unchecked(pt.tri.v[st[2]]);
    let (ba, bb, bo) = (bz[sp[0]], bz[sp[1]], bz[sp[2]]);
    let mut worst = 0.0f64;
    for m in 0..d {
        let n = d - 1 - m;
        let rhs = ba * p.coeff(exps(sp, [m + 1, n, 0]))
            + bb * p.coeff(exps(sp, [m, n + 1, 0]))
            + bo * p.coeff(exps(sp, [m, n, 1]));
        let lhs = pt.coeff(exps(st, [m, n, 1]));
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(c0.max(worst / scale))
}

pub fn c0_join(p: &BBPoly, pt: &BBPoly, tol: f64) -> Result<bool> {
    Ok(c0_defect(p, pt)? <= tol)
}

pub fn c1_join(p: &BBPoly, pt: &BBPoly, tol: f64) -> Result<bool> {
    Ok(c1_defect(p, pt)? <= tol)
}
