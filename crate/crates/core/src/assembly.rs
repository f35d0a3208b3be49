//! Galerkin assembly of linear second-order problems in the spline space, Sobolev norms
//! and residuals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::bernstein::{basis_with_derivatives, Jet2, Vec2};
use crate::error::{Error, Result};
use crate::quadrature::{element_rule, QuadPoint};
use crate::space::{SplineFunction, SplineSpace};
use crate::sparse::{solve_symmetric, CsrMatrix, SparseSolution};

/// Coefficients of `∫ ∇u·A∇v + ∫ v b·∇u + ∫ c u v = ∫ f v` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCoefficients {
    pub a: Matrix2<f64>,
    pub b: Vec2,
    pub c: f64,
    pub f: f64,
}

impl Default for PointCoefficients {
    fn default() -> Self {
        Self {
            a: Matrix2::zeros(),
            b: Vec2::zeros(),
            c: 0.0,
            f: 0.0,
        }
    }
}

type CoefficientFn = dyn Fn(usize, &QuadPoint) -> PointCoefficients + Send + Sync;

/// A linear problem in weak form, with coefficients evaluated per triangle and quadrature
/// point (so that they may depend on spline data of the current iterate).
pub struct LinearEllipticProblem {
    coefficients: Box<CoefficientFn>,
    /// Whether `A` is symmetric and `b = 0`, so the assembled matrix is symmetric.
    pub symmetric: bool,
}

impl LinearEllipticProblem {
    pub fn new(symmetric: bool, f: impl Fn(usize, &QuadPoint) -> PointCoefficients + Send + Sync + 'static) -> Self {
        Self {
            coefficients: Box::new(f),
            symmetric,
        }
    }

    /// Coefficients depending on position only.
    pub fn from_fields(symmetric: bool, f: impl Fn(Vec2) -> PointCoefficients + Send + Sync + 'static) -> Self {
        Self::new(symmetric, move |_, q| f(q.x))
    }

    pub fn coefficients(&self, t: usize, q: &QuadPoint) -> PointCoefficients {
        (self.coefficients)(t, q)
    }
}

/// A spline space with its quadrature rules.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub space: Arc<SplineSpace>,
    pub rules: Vec<Vec<QuadPoint>>,
    dof_coords: Vec<Vec2>,
}

/// Values, gradients and Hessians of the local basis functions of one triangle at its
/// quadrature points, `[point][local dof]`.
pub struct ElementBasis {
    pub dofs: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<Vec2>>,
    pub hess: Vec<Vec<Matrix2<f64>>>,
}

impl Discretization {
    pub fn new(space: Arc<SplineSpace>) -> Result<Self> {
        let rules = (0..space.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let r = element_rule(&space.mesh, t)?;
                if r.iter().any(|q| !(q.weight > 0.0)) {
                    return Err(Error::Geometry(format!(
                        "non-positive quadrature weight on triangle {t}"
                    )));
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        let dof_coords = (0..space.dim()).map(|k| space.dof_location(k)).collect();
        Ok(Self {
            space,
            rules,
            dof_coords,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn element_basis(&self, t: usize) -> ElementBasis {
        let map = &self.space.maps[t];
        let tri = self.space.mesh.chord_triangle(t);
        let bg = tri.bary_gradients();
        let nloc = map.dofs.len();
        let rule = &self.rules[t];
        let (mut bv, mut bgr, mut bh) = (Vec::new(), Vec::new(), Vec::new());
        let mut out = ElementBasis {
            dofs: map.dofs.clone(),
            values: Vec::with_capacity(rule.len()),
            grads: Vec::with_capacity(rule.len()),
            hess: Vec::with_capacity(rule.len()),
        };
        for q in rule {
            basis_with_derivatives(map.degree, q.bary, &bg, &mut bv, &mut bgr, &mut bh);
            let mut v = vec![0.0; nloc];
            let mut g = vec![Vec2::zeros(); nloc];
            let mut h = vec![Matrix2::zeros(); nloc];
            for (i, ((bvi, bgi), bhi)) in bv.iter().zip(&bgr).zip(&bh).enumerate() {
                for j in 0..nloc {
                    let m = map.coef[(i, j)];
                    if m != 0.0 {
                        v[j] += m * bvi;
                        g[j] += bgi * m;
                        h[j] += bhi * m;
                    }
                }
            }
            out.values.push(v);
            out.grads.push(g);
            out.hess.push(h);
        }
        out
    }

    /// `Σ_T Σ_q w_q f(t, q)`.
    pub fn integrate(&self, f: impl Fn(usize, &QuadPoint) -> f64 + Sync) -> f64 {
        let parts: Vec<f64> = (0..self.rules.len())
            .into_par_iter()
            .map(|t| self.rules[t].iter().map(|q| q.weight * f(t, q)).sum())
            .collect();
        // fixed-order reduction keeps the result independent of thread scheduling
        parts.iter().sum()
    }

    pub fn area(&self) -> f64 {
        self.integrate(|_, _| 1.0)
    }

    pub fn solve(&self, system: &SparseSystem) -> Result<SparseSolution> {
        solve_symmetric(&system.matrix, &system.rhs, Some(&self.dof_coords))
    }
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

type Local = (Vec<usize>, DMatrix<f64>, DVector<f64>);

fn local_system(disc: &Discretization, problem: &LinearEllipticProblem, t: usize) -> Local {
    let eb = disc.element_basis(t);
    let n = eb.dofs.len();
    let mut k = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    for (qi, q) in disc.rules[t].iter().enumerate() {
        let c = problem.coefficients(t, q);
        let w = q.weight;
        let (v, g) = (&eb.values[qi], &eb.grads[qi]);
        let ag: Vec<Vec2> = g.iter().map(|gj| c.a * gj).collect();
        for i in 0..n {
            f[i] += w * c.f * v[i];
            for j in 0..n {
                // row i: test function, column j: trial function
                let mut e = g[i].dot(&ag[j]) + c.c * v[j] * v[i];
                if c.b != Vec2::zeros() {
                    e += v[i] * c.b.dot(&g[j]);
                }
                k[(i, j)] += w * e;
            }
        }
    }
    (eb.dofs, k, f)
}

/// Global matrix and load vector in the dof basis. Local systems are computed in parallel
/// and scattered in triangle order, so the result does not depend on the thread count.
pub fn assemble(problem: &LinearEllipticProblem, disc: &Discretization) -> SparseSystem {
    let nt = disc.space.mesh.n_triangles();
    let locals: Vec<Local> = (0..nt)
        .into_par_iter()
        .map(|t| local_system(disc, problem, t))
        .collect();
    let n = disc.dim();
    let mut trip = Vec::with_capacity(locals.iter().map(|l| l.0.len().pow(2)).sum());
    let mut rhs = vec![0.0; n];
    for (dofs, k, f) in &locals {
        for (i, &gi) in dofs.iter().enumerate() {
            rhs[gi] += f[i];
            for (j, &gj) in dofs.iter().enumerate() {
                trip.push((gi, gj, k[(i, j)]));
            }
        }
    }
    let mut matrix = CsrMatrix::from_triplets(n, trip);
    if problem.symmetric {
        symmetrize(&mut matrix);
    }
    SparseSystem { matrix, rhs }
}

/// Replaces `A` by `(A + Aᵀ)/2`, removing round-off asymmetry.
fn symmetrize(a: &mut CsrMatrix) {
    let t = a.clone();
    for r in 0..a.n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col_idx[k];
            a.values[k] = 0.5 * (t.values[k] + t.get(c, r));
        }
    }
}

/// Error in the L², H¹ and H² norms, each including the lower-order terms:
/// `‖e‖²_{H²} = Σ_{|α| ≤ 2} ‖D^α e‖²` with one term per multi-index.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Norms of `a − b` integrated with the rules of `disc`. Both sides are evaluated at the
/// quadrature points of the given triangle.
pub fn difference_norms(
    disc: &Discretization,
    a: impl Fn(usize, &QuadPoint) -> Jet2 + Sync,
    b: impl Fn(usize, &QuadPoint) -> Jet2 + Sync,
) -> Norms {
    let nt = disc.rules.len();
    let parts: Vec<[f64; 3]> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let mut s = [0.0; 3];
            for q in &disc.rules[t] {
                let (ja, jb) = (a(t, q), b(t, q));
                let e0 = (ja.value - jb.value).powi(2);
                let e1 = (ja.grad - jb.grad).norm_squared();
                let dh = ja.hess - jb.hess;
                let e2 = dh[(0, 0)].powi(2) + dh[(0, 1)].powi(2) + dh[(1, 1)].powi(2);
                s[0] += q.weight * e0;
                s[1] += q.weight * e1;
                s[2] += q.weight * e2;
            }
            s
        })
        .collect();
    let s = parts
        .iter()
        .fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
    Norms {
        l2: s[0].sqrt(),
        h1: (s[0] + s[1]).sqrt(),
        h2: (s[0] + s[1] + s[2]).sqrt(),
    }
}

/// Norms of `s − u` for a field `u` given by its 2-jet.
pub fn error_norms(disc: &Discretization, s: &SplineFunction, u: impl Fn(Vec2) -> Jet2 + Sync) -> Norms {
    check_same_space(disc, s);
    difference_norms(disc, |t, q| s.patch(t).jet_at(q.bary), |_, q| u(q.x))
}

/// Norms of `coarse − fine`, integrated on the mesh of `fine` (which should refine the
/// mesh of `coarse`).
pub fn spline_difference_norms(fine_disc: &Discretization, fine: &SplineFunction, coarse: &SplineFunction) -> Norms {
    check_same_space(fine_disc, fine);
    let locator = crate::space::Locator::new(coarse);
    difference_norms(fine_disc, |t, q| fine.patch(t).jet_at(q.bary), |_, q| locator.jet(q.x))
}

/// `‖det ∇²s − g‖_{L²}`.
pub fn residual_norm(disc: &Discretization, s: &SplineFunction, g: impl Fn(Vec2) -> f64 + Sync) -> f64 {
    check_same_space(disc, s);
    disc.integrate(|t, q| {
        let h = s.patch(t).jet_at(q.bary).hess;
        (h.determinant() - g(q.x)).powi(2)
    })
    .sqrt()
}

fn check_same_space(disc: &Discretization, s: &SplineFunction) {
    assert!(
        Arc::ptr_eq(&disc.space, &s.space),
        "spline and discretization use different spaces"
    );
}
