//! Local quasi-interpolation into the spline space.
//!
//! Every dof is computed from data of the target function near its triangle: jets at
//! interior vertices, local polynomial fits for edge and buffer dofs, and a weighted fit
//! `f ≈ q p` on pie triangles. Piecewise polynomials of the right degree are reproduced.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::jets::{jet_to_ring_matrix, jet_to_vec};
use super::{DofCategory, SplineFunction, SplineSpace};
use crate::bernstein::{d2_ring, dim, index, multi_indices, BBPoly, Jet2, Vec2};
use crate::error::{Error, Result};
use crate::mesh::Simplex;
use crate::quadrature::gauss_legendre;

/// Anything that can report its value, gradient and Hessian at a point of the domain.
pub trait JetSource {
    fn jet(&self, x: Vec2) -> Jet2;

    fn value(&self, x: Vec2) -> f64 {
        self.jet(x).value
    }
}

impl<F: Fn(Vec2) -> Jet2> JetSource for F {
    fn jet(&self, x: Vec2) -> Jet2 {
        self(x)
    }
}

impl JetSource for SplineFunction {
    /// Points slightly outside every triangle (round-off on curved edges) are evaluated
    /// on the nearest one.
    fn jet(&self, x: Vec2) -> Jet2 {
        let mesh = &self.space.mesh;
        match mesh.locate(x, None) {
            Ok((t, b)) => self.patch(t).jet_at(b),
            Err(_) => {
                let (t, b) = (0..mesh.n_triangles())
                    .map(|t| (t, mesh.chord_triangle(t).barycentric_unchecked(x)))
                    .max_by(|a, b| {
                        let ma = a.1.iter().copied().fold(f64::INFINITY, f64::min);
                        let mb = b.1.iter().copied().fold(f64::INFINITY, f64::min);
                        ma.total_cmp(&mb)
                    })
                    .expect("mesh has triangles");
                self.patch(t).jet_at(b)
            }
        }
    }
}

/// Least-squares solution of `a c ≈ b`.
fn lsq(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| Error::Space(format!("local fit failed: {e}")))
}

/// BB coefficients of degree `d` on triangle `t` fitted to `f` at the domain points of
/// degree `d + 1`.
fn polynomial_fit(space: &SplineSpace, t: usize, d: usize, f: &dyn JetSource) -> Result<Vec<f64>> {
    let tri = space.mesh.chord_triangle(t);
    let pts = multi_indices(d + 1);
    let mut a = DMatrix::zeros(pts.len(), dim(d));
    let mut rhs = DVector::zeros(pts.len());
    let mut unit = BBPoly::zero(tri, d);
    for (r, e) in pts.iter().enumerate() {
        let b = e.map(|k| k as f64 / (d + 1) as f64);
        rhs[r] = f.value(tri.point(b));
        for c in 0..dim(d) {
            unit.coeffs[c] = 1.0;
            a[(r, c)] = unit.value_at(b);
            unit.coeffs[c] = 0.0;
        }
    }
    Ok(lsq(a, rhs)?.as_slice().to_vec())
}

/// Quartic factor on pie triangle `t` fitted so that `q p ≈ f` on the curved region.
fn pie_fit(space: &SplineSpace, t: usize, f: &dyn JetSource) -> Result<Vec<f64>> {
    let mesh = &space.mesh;
    let tri = mesh.chord_triangle(t);
    let q = BBPoly {
        tri,
        degree: 2,
        coeffs: space.pie_q[t].expect("pie triangle").to_vec(),
    };
    let (x, _) = gauss_legendre(7);
    let mut rows = Vec::new();
    for &s in &x {
        for &r in &x {
            rows.push(mesh.pie_point(t, r, s)?.0);
        }
    }
    let mut a = DMatrix::zeros(rows.len(), dim(4));
    let mut rhs = DVector::zeros(rows.len());
    let mut unit = BBPoly::zero(tri, 4);
    for (i, &p) in rows.iter().enumerate() {
        let b = tri.barycentric_unchecked(p);
        let qv = q.value_at(b);
        rhs[i] = f.value(p);
        for c in 0..dim(4) {
            unit.coeffs[c] = 1.0;
            a[(i, c)] = qv * unit.value_at(b);
            unit.coeffs[c] = 0.0;
        }
    }
    Ok(lsq(a, rhs)?.as_slice().to_vec())
}

/// The spline whose dofs are the local functionals applied to `f`.
///
/// `f` should vanish on the boundary; only its values and first derivatives there enter.
pub fn quasi_interpolate(space: &Arc<SplineSpace>, f: &dyn JetSource) -> Result<SplineFunction> {
    let mesh = &space.mesh;
    let mut fits: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut dofs = Vec::with_capacity(space.dim());
    for d in &space.mds.dofs {
        let t = d.triangle;
        let val = match d.category {
            DofCategory::InteriorVertex => {
                let Simplex::Vertex(v) = d.owner else { unreachable!() };
                let slot = mesh.slot(t, v).unwrap();
                let jet = jet_to_vec(&f.jet(mesh.vertices[v]));
                let ring = jet_to_ring_matrix(&mesh.chord_triangle(t), slot, 5) * jet;
                let k = d2_ring(5, slot).iter().position(|p| *p == d.point).unwrap();
                ring[k]
            }
            DofCategory::InteriorEdge => {
                if !fits.contains_key(&t) {
                    fits.insert(t, polynomial_fit(space, t, 5, f)?);
                }
                fits[&t][index(5, d.point.0)]
            }
            DofCategory::Buffer => {
                if !fits.contains_key(&t) {
                    fits.insert(t, polynomial_fit(space, t, 6, f)?);
                }
                fits[&t][index(6, d.point.0)]
            }
            DofCategory::Pie => {
                if !fits.contains_key(&t) {
                    fits.insert(t, pie_fit(space, t, f)?);
                }
                fits[&t][index(4, d.point.0)]
            }
            DofCategory::TangentBoundaryVertex => {
                let Simplex::Vertex(v) = d.owner else { unreachable!() };
                let x = mesh.vertices[v];
                let gq = mesh.pie_conic(t)?.grad(x);
                f.jet(x).grad.dot(&gq) / gq.norm_squared()
            }
        };
        dofs.push(val);
    }
    SplineFunction::new(space.clone(), dofs)
}

/// Moves a spline to another space (typically a refinement) by quasi-interpolation.
pub fn transfer(s: &SplineFunction, target: &Arc<SplineSpace>) -> Result<SplineFunction> {
    quasi_interpolate(target, &super::Locator::new(s))
}
