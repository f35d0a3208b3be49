//! Built-in test problems: domains, shipped initial meshes and data.
//!
//! The meshes in `data/` are written by `tools/gen_meshes.py` and validated when loaded.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::bernstein::{Jet2, Vec2};
use crate::error::{Error, Result};
use crate::geometry::ConicDomain;
use crate::mesh::{CurvedTriangulation, MeshFile};
use crate::solver::MongeAmpereProblem;

const DISK_MESH: &str = include_str!("../data/disk.json");
const ELLIPSE_MESH: &str = include_str!("../data/ellipse.json");
const C2_MESH: &str = include_str!("../data/c2-domain.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// Unit disk, `u = exp(|x|²/2) − exp(1/2)`.
    Disk,
    /// Ellipse `x1² + 6.25 x2² = 1`, `g = exp(x1)`.
    EllipseExp,
    /// Same ellipse, `g = sin(π|x1|) + 1.1`.
    EllipseSin,
    /// Centrally symmetric domain with curvature-continuous joins, `g = 1`.
    C2Domain,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [Self::Disk, Self::EllipseExp, Self::EllipseSin, Self::C2Domain];

    pub fn name(self) -> &'static str {
        match self {
            Self::Disk => "disk",
            Self::EllipseExp => "ellipse-exp",
            Self::EllipseSin => "ellipse-sin",
            Self::C2Domain => "c2-domain",
        }
    }

    /// Name of the shipped mesh.
    pub fn mesh_name(self) -> &'static str {
        match self {
            Self::Disk => "disk",
            Self::EllipseExp | Self::EllipseSin => "ellipse",
            Self::C2Domain => "c2-domain",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::Input(format!(
                "unknown problem '{s}' (expected disk, ellipse-exp, ellipse-sin or c2-domain)"
            ))
        })
    }
}

/// The shipped initial mesh `disk`, `ellipse` or `c2-domain`.
pub fn builtin_mesh(name: &str) -> Result<CurvedTriangulation> {
    let src = match name {
        "disk" => DISK_MESH,
        "ellipse" => ELLIPSE_MESH,
        "c2-domain" => C2_MESH,
        _ => return Err(Error::Input(format!("no built-in mesh named '{name}'"))),
    };
    let file: MeshFile = serde_json::from_str(src)?;
    file.into_mesh()
}

pub fn builtin_domain(id: ProblemId) -> Result<ConicDomain> {
    Ok(builtin_mesh(id.mesh_name())?.domain)
}

/// Exact solution of the disk problem.
pub fn disk_solution(x: Vec2) -> Jet2 {
    let e = (0.5 * x.norm_squared()).exp();
    Jet2 {
        value: e - 0.5f64.exp(),
        grad: x * e,
        hess: (Matrix2::identity() + x * x.transpose()) * e,
    }
}

pub fn builtin_problem(id: ProblemId) -> Result<MongeAmpereProblem> {
    let mesh = builtin_mesh(id.mesh_name())?;
    let (g, exact): (Arc<dyn Fn(Vec2) -> f64 + Send + Sync>, _) = match id {
        ProblemId::Disk => {
            let exact: Arc<dyn Fn(Vec2) -> Jet2 + Send + Sync> = Arc::new(disk_solution);
            (
                Arc::new(|x: Vec2| {
                    let r2 = x.norm_squared();
                    (1.0 + r2) * r2.exp()
                }),
                Some(exact),
            )
        }
        ProblemId::EllipseExp => (Arc::new(|x: Vec2| x.x.exp()), None),
        ProblemId::EllipseSin => (Arc::new(|x: Vec2| (PI * x.x.abs()).sin() + 1.1), None),
        ProblemId::C2Domain => (Arc::new(|_: Vec2| 1.0), None),
    };
    Ok(MongeAmpereProblem {
        name: id.name().to_string(),
        mesh,
        g,
        exact,
    })
}

/// Shape parameters of the C² domain: the top arc is `x1 = a cos t`, `x2 = b sin t − c2`
/// for `t ∈ [π − t_join, t_join]`, and the side arcs are circles of radius `r` about
/// `(±c1, 0)`, the osculating circle of the unshifted ellipse at `t_join`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C2Parameters {
    pub a: f64,
    pub b: f64,
    pub t_join: f64,
    pub c1: f64,
    pub c2: f64,
    pub r: f64,
}

impl Default for C2Parameters {
    fn default() -> Self {
        let (a, b, t) = (4.0, 1.3, 0.85 * PI);
        let (s, c) = t.sin_cos();
        let speed2 = a * a * s * s + b * b * c * c;
        let r = speed2.powf(1.5) / (a * b);
        // centre = point + r · (inward unit normal)
        let n = Vec2::new(-b * c, -a * s) / speed2.sqrt();
        let centre = Vec2::new(a * c, b * s) + n * r;
        Self {
            a,
            b,
            t_join: t,
            c1: centre.x,
            c2: centre.y,
            r,
        }
    }
}

/// Largest curvature difference between consecutive arcs at the tangent corners of a domain.
pub fn curvature_mismatch(domain: &ConicDomain) -> f64 {
    let n = domain.arcs.len();
    (0..n)
        .filter(|&j| domain.is_tangent_corner(j))
        .map(|j| {
            let z = domain.arcs[j].from;
            let prev = &domain.arcs[(j + n - 1) % n];
            (prev.conic.curvature(z) - domain.arcs[j].conic.curvature(z)).abs()
        })
        .fold(0.0, f64::max)
}
