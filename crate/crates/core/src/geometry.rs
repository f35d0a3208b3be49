//! Piecewise-conic domain boundaries.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::bernstein::{cross, Triangle, Vec2};
use crate::error::{Error, Result};

/// Relative tolerance for "a point lies on a conic".
pub const ON_CONIC_TOL: f64 = 1e-12;
/// Relative tolerance for the gradient-collinearity test deciding tangency at corners.
pub const TANGENCY_TOL: f64 = 1e-10;

/// `q(x) = k1 x1² + k2 x1 x2 + k3 x2² + k4 x1 + k5 x2 + k6`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conic {
    pub k: [f64; 6],
}

impl Conic {
    /// Builds a conic, rejecting reducible quadratics and vanishing polynomials.
    pub fn new(k: [f64; 6]) -> Result<Self> {
        let c = Self { k };
        c.validate()?;
        Ok(c)
    }

    /// The circle `r² − (x1 − c1)² − (x2 − c2)²`, positive inside.
    pub fn circle(center: Vec2, r: f64) -> Self {
        Self {
            k: [
                -1.0,
                0.0,
                -1.0,
                2.0 * center.x,
                2.0 * center.y,
                r * r - center.norm_squared(),
            ],
        }
    }

    /// The ellipse `1 − ((x1 − c1)/a)² − ((x2 − c2)/b)²`, positive inside.
    pub fn ellipse(center: Vec2, a: f64, b: f64) -> Self {
        let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
        Self {
            k: [
                -ia,
                0.0,
                -ib,
                2.0 * center.x * ia,
                2.0 * center.y * ib,
                1.0 - center.x * center.x * ia - center.y * center.y * ib,
            ],
        }
    }

    pub fn scale(&self) -> f64 {
        self.k.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// 1 for a straight line, 2 for a genuine conic.
    pub fn degree(&self) -> usize {
        let s = self.scale();
        if self.k[..3].iter().all(|x| x.abs() <= 1e-14 * s) {
            1
        } else {
            2
        }
    }

    fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !s.is_finite() || s == 0.0 {
            return Err(Error::InvalidConic("all coefficients vanish".into()));
        }
        if self.degree() == 1 {
            if self.k[3].abs().max(self.k[4].abs()) <= 1e-14 * s {
                return Err(Error::InvalidConic("constant polynomial".into()));
            }
            return Ok(());
        }
        // A quadratic factors into two (real or complex) linear forms exactly when the
        // symmetric 3×3 matrix of its homogenization is singular.
        let m = self.matrix() / s;
        let det = m.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidConic(format!(
                "reducible quadratic (normalized determinant {det:e})"
            )));
        }
        Ok(())
    }

    fn matrix(&self) -> Matrix3<f64> {
        let k = &self.k;
        Matrix3::new(
            k[0],
            0.5 * k[1],
            0.5 * k[3],
            0.5 * k[1],
            k[2],
            0.5 * k[4],
            0.5 * k[3],
            0.5 * k[4],
            k[5],
        )
    }

    #[inline]
    pub fn eval(&self, x: Vec2) -> f64 {
        let k = &self.k;
        k[0] * x.x * x.x + k[1] * x.x * x.y + k[2] * x.y * x.y + k[3] * x.x + k[4] * x.y + k[5]
    }

    #[inline]
    pub fn grad(&self, x: Vec2) -> Vec2 {
        let k = &self.k;
        Vec2::new(
            2.0 * k[0] * x.x + k[1] * x.y + k[3],
            k[1] * x.x + 2.0 * k[2] * x.y + k[4],
        )
    }

    pub fn hessian(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::new(2.0 * self.k[0], self.k[1], self.k[1], 2.0 * self.k[2])
    }

    /// Polar form `q[x, y]`, so that `q[x, x] = q(x)`.
    pub fn blossom(&self, x: Vec2, y: Vec2) -> f64 {
        let k = &self.k;
        k[0] * x.x * y.x
            + 0.5 * k[1] * (x.x * y.y + x.y * y.x)
            + k[2] * x.y * y.y
            + 0.5 * k[3] * (x.x + y.x)
            + 0.5 * k[4] * (x.y + y.y)
            + k[5]
    }

    pub fn scaled(&self, f: f64) -> Conic {
        Conic {
            k: self.k.map(|x| x * f),
        }
    }

    /// Magnitude used for relative on-conic tests near `x`.
    pub fn local_scale(&self, x: Vec2) -> f64 {
        self.scale() * x.norm_squared().max(1.0)
    }

    /// Unsigned curvature of the level curve through `x`.
    pub fn curvature(&self, x: Vec2) -> f64 {
        let g = self.grad(x);
        let h = self.hessian();
        let num = h[(0, 0)] * g.y * g.y - 2.0 * h[(0, 1)] * g.x * g.y + h[(1, 1)] * g.x * g.x;
        num.abs() / g.norm().powi(3)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.eval(x).abs() <= ON_CONIC_TOL * self.local_scale(x)
    }
}

pub fn eval_conic(q: &Conic, x: Vec2) -> f64 {
    q.eval(x)
}

pub fn grad_conic(q: &Conic, x: Vec2) -> Vec2 {
    q.grad(x)
}

/// A piece of `{q = 0}` traversed from `from` to `to` with the domain on its left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryArc {
    pub conic: Conic,
    pub from: Vec2,
    pub to: Vec2,
}

impl BoundaryArc {
    pub fn new(conic: Conic, from: Vec2, to: Vec2) -> Result<Self> {
        let arc = Self { conic, from, to };
        for (name, z) in [("start", from), ("end", to)] {
            if !conic.contains(z) {
                return Err(Error::Geometry(format!(
                    "arc {name} point ({}, {}) is off its conic (q = {:e})",
                    z.x,
                    z.y,
                    conic.eval(z)
                )));
            }
        }
        if (to - from).norm() <= 1e-12 * from.norm().max(to.norm()).max(1.0) {
            return Err(Error::Geometry("arc endpoints coincide".into()));
        }
        Ok(arc)
    }

    /// The point of the arc on the perpendicular bisector of its chord.
    pub fn midpoint(&self) -> Result<Vec2> {
        let c = 0.5 * (self.from + self.to);
        let d = self.to - self.from;
        let n = Vec2::new(-d.y, d.x);
        let roots = line_roots(&self.conic, c, n)?;
        roots
            .into_iter()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .map(|t| c + n * t)
            .ok_or_else(|| Error::Geometry("arc has no midpoint on its conic".into()))
    }

    /// Unit tangent at a point of the arc, in the direction of traversal.
    pub fn tangent(&self, x: Vec2) -> Vec2 {
        let g = self.conic.grad(x);
        Vec2::new(g.y, -g.x) / g.norm()
    }
}

/// Real roots `t` of `q(c + t n) = 0`, sorted.
fn line_roots(q: &Conic, c: Vec2, n: Vec2) -> Result<Vec<f64>> {
    let k = &q.k;
    let a = k[0] * n.x * n.x + k[1] * n.x * n.y + k[2] * n.y * n.y;
    let b = q.grad(c).dot(&n);
    let cc = q.eval(c);
    let scale = a.abs().max(b.abs()).max(cc.abs());
    if scale == 0.0 {
        return Err(Error::Geometry("line lies on the conic".into()));
    }
    let mut roots = Vec::new();
    if a.abs() <= 1e-14 * scale {
        if b.abs() > 1e-14 * scale {
            roots.push(-cc / b);
        }
    } else {
        let disc = b * b - 4.0 * a * cc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let qq = -0.5 * (b + b.signum() * s);
            if qq != 0.0 {
                roots.push(qq / a);
                roots.push(cc / qq);
            } else {
                roots.push(0.0);
            }
        }
    }
    for t in roots.iter_mut() {
        // Newton polish
        for _ in 0..3 {
            let x = c + n * *t;
            let f = q.eval(x);
            let df = q.grad(x).dot(&n);
            if df == 0.0 {
                break;
            }
            *t -= f / df;
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// Flips the sign of the conic if needed so that the outward normal derivative at the arc
/// midpoint is negative.
pub fn normalize_arc_sign(arc: &BoundaryArc) -> Result<BoundaryArc> {
    if (arc.to - arc.from).norm() <= 1e-12 * arc.from.norm().max(1.0) {
        return Err(Error::Geometry("arc endpoints coincide".into()));
    }
    let m = arc.midpoint()?;
    let g = arc.conic.grad(m);
    let d = arc.to - arc.from;
    let outward = Vec2::new(d.y, -d.x);
    let dn = g.dot(&outward);
    if dn == 0.0 {
        return Err(Error::Geometry(
            "conic gradient vanishes or is tangent to the chord normal at the arc midpoint".into(),
        ));
    }
    let mut out = *arc;
    if dn > 0.0 {
        out.conic = arc.conic.scaled(-1.0);
    }
    Ok(out)
}

/// Largest admissible ray parameter in [`arc_point_on_ray`].
pub const RAY_BRACKET: f64 = 10.0;

/// Intersection of the ray from `origin` through `through` with the conic of `arc`.
///
/// The ray parameter is `t` with `x = origin + t (through − origin)`; exactly one root must
/// lie in `(0, RAY_BRACKET]`.
pub fn arc_point_on_ray(arc: &BoundaryArc, origin: Vec2, through: Vec2) -> Result<Vec2> {
    let n = through - origin;
    if n.norm() == 0.0 {
        return Err(Error::Geometry("ray direction vanishes".into()));
    }
    let roots: Vec<f64> = line_roots(&arc.conic, origin, n)?
        .into_iter()
        .filter(|t| *t > 1e-12 && *t <= RAY_BRACKET)
        .collect();
    match roots.as_slice() {
        [t] => Ok(origin + n * *t),
        [] => Err(Error::Geometry(format!(
            "ray from ({}, {}) through ({}, {}) misses the arc",
            origin.x, origin.y, through.x, through.y
        ))),
        _ => Err(Error::Geometry(format!(
            "ray from ({}, {}) crosses the arc twice; pie triangle is not star-shaped",
            origin.x, origin.y
        ))),
    }
}

/// Degree-2 BB coefficients of `q` over `tri`, in the order (200, 110, 101, 020, 011, 002).
pub fn conic_bb_form(q: &Conic, tri: &Triangle) -> [f64; 6] {
    let v = &tri.v;
    [
        q.blossom(v[0], v[0]),
        q.blossom(v[0], v[1]),
        q.blossom(v[0], v[2]),
        q.blossom(v[1], v[1]),
        q.blossom(v[1], v[2]),
        q.blossom(v[2], v[2]),
    ]
}

/// The conic scaled so that it equals 1 at the first vertex of the chord triangle.
pub fn normalized_conic(q: &Conic, tri: &Triangle) -> Result<Conic> {
    let q1 = q.eval(tri.v[0]);
    if q1.abs() <= 1e-12 * q.local_scale(tri.v[0]) {
        return Err(Error::Geometry(
            "conic vanishes at the interior vertex of a pie triangle".into(),
        ));
    }
    Ok(q.scaled(1.0 / q1))
}

/// BB form of the conic over a pie chord triangle, normalized to `q(v1) = 1`. The
/// coefficients at the two boundary vertices are set to exactly zero.
pub fn normalized_conic_bb_form(q: &Conic, tri: &Triangle) -> Result<[f64; 6]> {
    let qn = normalized_conic(q, tri)?;
    let mut c = conic_bb_form(&qn, tri);
    c[0] = 1.0;
    c[3] = 0.0;
    c[5] = 0.0;
    Ok(c)
}

/// A simply connected region bounded by counter-clockwise chained arcs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicDomain {
    pub arcs: Vec<BoundaryArc>,
}

impl ConicDomain {
    /// Validates chaining and applies sign normalization to every arc.
    pub fn new(arcs: Vec<BoundaryArc>) -> Result<Self> {
        if arcs.len() < 2 {
            return Err(Error::Geometry("a domain needs at least two arcs".into()));
        }
        let n = arcs.len();
        for i in 0..n {
            let a = &arcs[i];
            let b = &arcs[(i + 1) % n];
            if (a.to - b.from).norm() > 1e-12 * a.to.norm().max(1.0) {
                return Err(Error::Geometry(format!(
                    "arc {i} ends at ({}, {}) but arc {} starts at ({}, {})",
                    a.to.x,
                    a.to.y,
                    (i + 1) % n,
                    b.from.x,
                    b.from.y
                )));
            }
        }
        let arcs = arcs
            .iter()
            .map(|a| BoundaryArc::new(a.conic, a.from, a.to).and_then(|a| normalize_arc_sign(&a)))
            .collect::<Result<Vec<_>>>()?;
        let d = Self { arcs };
        for (j, w) in d.angles().into_iter().enumerate() {
            if !(w > 1e-12 && w < 2.0 * PI - 1e-12) {
                return Err(Error::Geometry(format!("corner {j} has interior angle {w}")));
            }
        }
        Ok(d)
    }

    /// Corner points `z_j`; `z_j` is the start of arc `j`.
    pub fn corners(&self) -> Vec<Vec2> {
        self.arcs.iter().map(|a| a.from).collect()
    }

    /// Interior angle at each corner.
    pub fn angles(&self) -> Vec<f64> {
        let n = self.arcs.len();
        (0..n)
            .map(|j| {
                let prev = &self.arcs[(j + n - 1) % n];
                let next = &self.arcs[j];
                let z = next.from;
                let tin = prev.tangent(z);
                let tout = next.tangent(z);
                let turn = cross(tin, tout).atan2(tin.dot(&tout));
                PI - turn
            })
            .collect()
    }

    /// Whether the boundary has a tangent line at corner `j`.
    pub fn is_tangent_corner(&self, j: usize) -> bool {
        let n = self.arcs.len();
        let z = self.arcs[j].from;
        let g1 = self.arcs[(j + n - 1) % n].conic.grad(z);
        let g2 = self.arcs[j].conic.grad(z);
        cross(g1, g2).abs() <= TANGENCY_TOL * g1.norm() * g2.norm() && g1.dot(&g2) > 0.0
    }

    pub fn area_of_chord_polygon(&self) -> f64 {
        let z = self.corners();
        let n = z.len();
        0.5 * (0..n).map(|i| cross(z[i], z[(i + 1) % n])).sum::<f64>()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: DomainFile = serde_json::from_str(s)?;
        f.into_domain()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self) -> DomainFile {
        DomainFile {
            arcs: self
                .arcs
                .iter()
                .map(|a| ArcFile {
                    coeffs: a.conic.k,
                    from: [a.from.x, a.from.y],
                    to: [a.to.x, a.to.y],
                })
                .collect(),
        }
    }
}

/// Serialized arc: `coeffs` are `[k1, ..., k6]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArcFile {
    pub coeffs: [f64; 6],
    pub from: [f64; 2],
    pub to: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainFile {
    pub arcs: Vec<ArcFile>,
}

impl DomainFile {
    pub fn into_domain(self) -> Result<ConicDomain> {
        let arcs = self
            .arcs
            .into_iter()
            .map(|a| {
                Ok(BoundaryArc {
                    conic: Conic::new(a.coeffs)?,
                    from: Vec2::new(a.from[0], a.from[1]),
                    to: Vec2::new(a.to[0], a.to[1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ConicDomain::new(arcs)
    }
}
