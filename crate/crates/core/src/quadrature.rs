//! Gauss rules on straight triangles (collapsed square) and on curved pie regions
//! (radial map).

use crate::bernstein::{Triangle, Vec2};
use crate::error::Result;
use crate::mesh::{CurvedTriangulation, TriClass};

/// Points per direction on straight triangles.
pub const TRIANGLE_ORDER: usize = 9;
/// Points per direction on pie triangles.
pub const PIE_ORDER: usize = 12;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    if n % 2 == 1 {
        // middle node of an odd rule sits exactly at the centre
        x[n / 2] = 0.5;
    }
    (x, w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub x: Vec2,
    /// Barycentric coordinates with respect to the (chord) triangle.
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Collapsed-square Gauss rule with `n × n` points, exact for degree `2n − 2`.
pub fn triangle_rule(tri: &Triangle, n: usize) -> Vec<QuadPoint> {
    let (x, w) = gauss_legendre(n);
    let area2 = 2.0 * tri.signed_area().abs();
    let mut out = Vec::with_capacity(n * n);
    for (&u, &wu) in x.iter().zip(&w) {
        for (&v, &wv) in x.iter().zip(&w) {
            let bary = [1.0 - u, u * (1.0 - v), u * v];
            out.push(QuadPoint {
                x: tri.point(bary),
                bary,
                weight: wu * wv * u * area2,
            });
        }
    }
    out
}

/// Rule over the curved region of a pie triangle through its radial parametrization.
pub fn pie_rule(mesh: &CurvedTriangulation, t: usize, n: usize) -> Result<Vec<QuadPoint>> {
    let (x, w) = gauss_legendre(n);
    let tri = mesh.chord_triangle(t);
    let mut out = Vec::with_capacity(n * n);
    for (&s, &ws) in x.iter().zip(&w) {
        for (&r, &wr) in x.iter().zip(&w) {
            let (p, jac) = mesh.pie_point(t, r, s)?;
            out.push(QuadPoint {
                x: p,
                bary: tri.barycentric_unchecked(p),
                weight: wr * ws * jac.abs(),
            });
        }
    }
    Ok(out)
}

/// The rule used for triangle `t` of the mesh.
pub fn element_rule(mesh: &CurvedTriangulation, t: usize) -> Result<Vec<QuadPoint>> {
    match mesh.class(t) {
        TriClass::Pie => pie_rule(mesh, t, PIE_ORDER),
        _ => Ok(triangle_rule(&mesh.chord_triangle(t), TRIANGLE_ORDER)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((got - 1.0 / (k + 1) as f64).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rule_matches_closed_form_moments() {
        // ∫_T x^a y^b over the reference triangle = a! b! / (a + b + 2)!
        let tri = Triangle::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let rule = triangle_rule(&tri, TRIANGLE_ORDER);
        for a in 0..=8 {
            for b in 0..=(16 - a).min(8) {
                let got: f64 = rule.iter().map(|q| q.weight * q.x.x.powi(a) * q.x.y.powi(b)).sum();
                let want = fact(a as usize) * fact(b as usize) / fact(a as usize + b as usize + 2);
                assert!((got - want).abs() < 1e-15, "{a} {b}: {got} {want}");
            }
        }
    }
}
