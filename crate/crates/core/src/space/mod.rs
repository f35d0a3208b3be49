//! The C¹ quintic spline space on a curved triangulation and its minimal determining set.
//!
//! A spline is stored as its vector of degrees of freedom. Each triangle carries a
//! [`PatchMap`], the dense matrix from the dofs it depends on to its BB coefficients
//! (degree 5 on ordinary triangles, degree 6 on buffer and pie triangles). On pie
//! triangles the patch is the product of a quartic factor `p` with the normalized conic
//! of the curved edge, so the spline vanishes on the boundary.

mod interp;
pub mod jets;
pub mod lin;
mod propagate;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bernstein::{dim, index, BBPoly, DomainPointIndex, Jet2, Vec2};
use crate::error::{Error, Result};
use crate::mesh::{CurvedTriangulation, MeshFile, PointLocator, Simplex, TriClass};

pub use interp::{quasi_interpolate, transfer, JetSource};
pub use propagate::degree_of;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofCategory {
    InteriorVertex,
    InteriorEdge,
    TangentBoundaryVertex,
    Pie,
    Buffer,
}

/// One element of the minimal determining set.
#[derive(Clone, Debug, PartialEq)]
pub struct DofDescriptor {
    pub category: DofCategory,
    pub owner: Simplex,
    /// Triangle whose coefficient is the dof.
    pub triangle: usize,
    /// Domain point on `triangle`; degree 4 for the quartic factor of a pie triangle.
    pub point: DomainPointIndex,
    pub support: Vec<usize>,
}

impl DofDescriptor {
    /// Whether the dof is a coefficient of the quartic factor rather than of the patch.
    pub fn on_quartic_factor(&self) -> bool {
        matches!(self.category, DofCategory::Pie | DofCategory::TangentBoundaryVertex)
    }
}

#[derive(Clone, Debug)]
pub struct MinimalDeterminingSet {
    pub dofs: Vec<DofDescriptor>,
    /// Sizes per category, in the order of [`DofCategory`].
    pub counts: [usize; 5],
}

impl MinimalDeterminingSet {
    fn from_descriptors(dofs: Vec<DofDescriptor>) -> Self {
        debug_assert!(dofs.windows(2).all(|w| w[0].category <= w[1].category));
        let mut counts = [0; 5];
        for d in &dofs {
            counts[d.category as usize] += 1;
        }
        Self { dofs, counts }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// `6 |V_I| + |E_I| + |V_B^1| + 5 |P| + 2 |B|` for the given mesh.
    pub fn expected_dimension(mesh: &CurvedTriangulation) -> usize {
        let c = mesh.category_counts();
        6 * c[0] + c[1] + c[2] + 5 * c[3] + 2 * c[4]
    }
}

/// Linear map from the dofs a triangle depends on to its BB coefficients.
#[derive(Clone, Debug)]
pub struct PatchMap {
    pub degree: usize,
    pub dofs: Vec<usize>,
    /// `dim(degree) × dofs.len()`.
    pub coef: DMatrix<f64>,
    /// Quartic factor map on pie triangles, `15 × dofs.len()`.
    pub p: Option<DMatrix<f64>>,
}

impl PatchMap {
    fn gather(&self, dofs: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dofs.len(), self.dofs.iter().map(|&i| dofs[i]))
    }

    pub fn coefficients(&self, dofs: &[f64]) -> Vec<f64> {
        (&self.coef * self.gather(dofs)).as_slice().to_vec()
    }

    pub fn quartic(&self, dofs: &[f64]) -> Option<Vec<f64>> {
        self.p.as_ref().map(|p| (p * self.gather(dofs)).as_slice().to_vec())
    }
}

#[derive(Clone, Debug)]
pub struct SplineSpace {
    pub mesh: CurvedTriangulation,
    pub mds: MinimalDeterminingSet,
    pub maps: Vec<PatchMap>,
    /// Normalized BB form of the boundary conic on each pie chord triangle.
    pub pie_q: Vec<Option<[f64; 6]>>,
    /// Largest relative disagreement between two routes to one coefficient.
    pub max_defect: f64,
    support: Vec<Vec<usize>>,
}

impl SplineSpace {
    pub fn new(mesh: CurvedTriangulation) -> Result<Self> {
        let prop = propagate::propagate_symbolic(&mesh)?;
        let expected = MinimalDeterminingSet::expected_dimension(&mesh);
        if prop.mds.len() != expected {
            return Err(Error::Space(format!(
                "determining set has {} elements, expected {expected}",
                prop.mds.len()
            )));
        }
        let maps = prop.maps;
        let mut support = vec![Vec::new(); prop.mds.len()];
        for (t, m) in maps.iter().enumerate() {
            for &d in &m.dofs {
                support[d].push(t);
            }
        }
        let mut mds = prop.mds;
        for (d, s) in mds.dofs.iter_mut().zip(&support) {
            d.support = s.clone();
        }
        log::debug!(
            "spline space: dim {}, max propagation defect {:e}",
            mds.len(),
            prop.max_defect
        );
        Ok(Self {
            mesh,
            mds,
            maps,
            pie_q: prop.pie_q,
            max_defect: prop.max_defect,
            support,
        })
    }

    pub fn dim(&self) -> usize {
        self.mds.len()
    }

    /// Triangles on which the basis function of dof `k` may be nonzero.
    pub fn basis_support(&self, k: usize) -> &[usize] {
        &self.support[k]
    }

    pub fn patch(&self, t: usize, dofs: &[f64]) -> BBPoly {
        let m = &self.maps[t];
        BBPoly {
            tri: self.mesh.chord_triangle(t),
            degree: m.degree,
            coeffs: m.coefficients(dofs),
        }
    }

    pub fn quartic_factor(&self, t: usize, dofs: &[f64]) -> Option<BBPoly> {
        self.maps[t].quartic(dofs).map(|c| BBPoly {
            tri: self.mesh.chord_triangle(t),
            degree: 4,
            coeffs: c,
        })
    }

    /// Reads the dofs back from patch coefficients (and quartic factors on pies).
    pub fn extract_dofs(&self, patches: &[Vec<f64>], quartics: &[Option<Vec<f64>>]) -> Result<Vec<f64>> {
        self.mds
            .dofs
            .iter()
            .map(|d| {
                let t = d.triangle;
                if d.on_quartic_factor() {
                    let p = quartics[t]
                        .as_ref()
                        .ok_or_else(|| Error::Space(format!("missing quartic factor for pie triangle {t}")))?;
                    Ok(p[index(4, d.point.0)])
                } else {
                    Ok(patches[t][index(self.maps[t].degree, d.point.0)])
                }
            })
            .collect()
    }

    /// A representative point of the simplex owning dof `k` (used for ordering).
    pub fn dof_location(&self, k: usize) -> Vec2 {
        let m = &self.mesh;
        match self.mds.dofs[k].owner {
            Simplex::Vertex(v) => m.vertices[v],
            Simplex::Edge(e) => {
                let [a, b] = m.edges[e].v;
                (m.vertices[a] + m.vertices[b]) * 0.5
            }
            Simplex::Triangle(t) => m.chord_triangle(t).centroid(),
        }
    }

    /// Triangles on which the basis function of dof `k` has a coefficient above `tol`.
    pub fn numerical_support(&self, k: usize, tol: f64) -> Vec<usize> {
        self.support[k]
            .iter()
            .copied()
            .filter(|&t| {
                let m = &self.maps[t];
                let j = m.dofs.iter().position(|&d| d == k).unwrap();
                m.coef.column(j).amax() > tol || m.p.as_ref().is_some_and(|p| p.column(j).amax() > tol)
            })
            .collect()
    }

    /// Triangles touching any of `set`, grown `ell` times.
    pub fn star(&self, set: &[Simplex], ell: usize) -> BTreeSet<usize> {
        self.mesh.star(set, ell)
    }
}

/// A spline given by its dof vector.
#[derive(Clone, Debug)]
pub struct SplineFunction {
    pub space: Arc<SplineSpace>,
    pub dofs: Vec<f64>,
    patches: Vec<BBPoly>,
}

impl SplineFunction {
    pub fn new(space: Arc<SplineSpace>, dofs: Vec<f64>) -> Result<Self> {
        if dofs.len() != space.dim() {
            return Err(Error::Input(format!(
                "expected {} dofs, got {}",
                space.dim(),
                dofs.len()
            )));
        }
        let patches = (0..space.mesh.n_triangles()).map(|t| space.patch(t, &dofs)).collect();
        Ok(Self { space, dofs, patches })
    }

    pub fn zero(space: Arc<SplineSpace>) -> Self {
        let n = space.dim();
        Self::new(space, vec![0.0; n]).expect("dimension matches")
    }

    pub fn patch(&self, t: usize) -> &BBPoly {
        &self.patches[t]
    }

    pub fn eval(&self, x: Vec2) -> Result<f64> {
        let (t, b) = self.space.mesh.locate(x, None)?;
        Ok(self.patches[t].value_at(b))
    }

    pub fn jet(&self, x: Vec2) -> Result<Jet2> {
        let (t, b) = self.space.mesh.locate(x, None)?;
        Ok(self.patches[t].jet_at(b))
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.patches.iter().map(|p| p.max_abs()).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> SplineFile {
        SplineFile {
            mesh: self.space.mesh.to_file(),
            dofs: self.dofs.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f: SplineFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let space = Arc::new(SplineSpace::new(f.mesh.into_mesh()?)?);
        Self::new(space, f.dofs)
    }
}

/// Repeated evaluation of a spline at arbitrary points through a bucket grid.
pub struct Locator<'a> {
    spline: &'a SplineFunction,
    grid: PointLocator,
}

impl<'a> Locator<'a> {
    pub fn new(spline: &'a SplineFunction) -> Self {
        Self {
            spline,
            grid: PointLocator::new(&spline.space.mesh),
        }
    }

    pub fn locate(&self, x: Vec2) -> Result<(usize, [f64; 3])> {
        self.grid.locate(&self.spline.space.mesh, x)
    }

    /// Jet at `x`; points outside the mesh are evaluated on the nearest triangle found by
    /// a full scan.
    pub fn jet(&self, x: Vec2) -> Jet2 {
        match self.locate(x) {
            Ok((t, b)) => self.spline.patch(t).jet_at(b),
            Err(_) => JetSource::jet(self.spline, x),
        }
    }
}

impl JetSource for Locator<'_> {
    fn jet(&self, x: Vec2) -> Jet2 {
        Locator::jet(self, x)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplineFile {
    pub mesh: MeshFile,
    pub dofs: Vec<f64>,
}

/// Number of BB coefficients stored for triangle class `c` (patch only).
pub fn patch_len(c: TriClass) -> usize {
    dim(degree_of(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::ring_disk;
    use crate::mesh::TriClass;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn space() -> Arc<SplineSpace> {
        Arc::new(SplineSpace::new(ring_disk(8)).unwrap())
    }

    fn random_spline(space: &Arc<SplineSpace>, seed: u64) -> SplineFunction {
        let mut rng = StdRng::seed_from_u64(seed);
        let dofs = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        SplineFunction::new(space.clone(), dofs).unwrap()
    }

    #[test]
    fn dimension_matches_category_formula() {
        let s = space();
        assert_eq!(s.mesh.category_counts(), [9, 16, 8, 8, 8]);
        assert_eq!(s.dim(), 134);
        assert_eq!(s.mds.counts, [54, 16, 8, 40, 16]);
        assert!(s.max_defect < 1e-12, "defect {:e}", s.max_defect);
    }

    #[test]
    fn random_splines_are_c1_across_interior_edges() {
        // compare values and gradients of both neighbouring patches at points of the edge
        let s = space();
        let f = random_spline(&s, 3);
        let mesh = &s.mesh;
        let mut worst = 0.0f64;
        for e in &mesh.edges {
            let [Some(t0), Some(t1)] = e.tris else { continue };
            let (a, b) = (mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
            for k in 0..=10 {
                let x = a + (b - a) * (k as f64 / 10.0);
                let j0 = f.patch(t0).jet(x);
                let j1 = f.patch(t1).jet(x);
                worst = worst.max((j0.value - j1.value).abs());
                worst = worst.max((j0.grad - j1.grad).norm());
            }
        }
        assert!(worst < 1e-9 * f.max_abs_coefficient().max(1.0), "jump {worst:e}");
    }

    #[test]
    fn random_splines_vanish_on_the_boundary() {
        let s = space();
        let f = random_spline(&s, 5);
        let mesh = &s.mesh;
        for t in mesh.triangles_of(TriClass::Pie) {
            for k in 0..=8 {
                let (x, _) = mesh.pie_point(t, 1.0, k as f64 / 8.0).unwrap();
                assert!(f.patch(t).value(x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dofs_are_read_back_from_coefficients() {
        let s = space();
        let f = random_spline(&s, 7);
        let patches: Vec<Vec<f64>> = (0..s.mesh.n_triangles()).map(|t| f.patch(t).coeffs.clone()).collect();
        let quartics: Vec<Option<Vec<f64>>> = (0..s.mesh.n_triangles())
            .map(|t| s.quartic_factor(t, &f.dofs).map(|p| p.coeffs))
            .collect();
        let back = s.extract_dofs(&patches, &quartics).unwrap();
        for (a, b) in back.iter().zip(&f.dofs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pie_patches_factor_through_the_conic() {
        let s = space();
        let f = random_spline(&s, 11);
        for t in s.mesh.triangles_of(TriClass::Pie) {
            let p = s.quartic_factor(t, &f.dofs).unwrap();
            let q = BBPoly::new(s.mesh.chord_triangle(t), 2, s.pie_q[t].unwrap().to_vec()).unwrap();
            let prod = crate::bernstein::bb_product(&p, &q).unwrap();
            for (a, b) in prod.coeffs.iter().zip(&f.patch(t).coeffs) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quasi_interpolation_reproduces_quintics_vanishing_on_the_circle() {
        // f = (1 − x² − y²) P with P cubic
        let p = |x: Vec2| 0.3 + x.x - 0.5 * x.y + x.x * x.y - 0.7 * x.x.powi(3) + 0.2 * x.y.powi(2);
        let f = move |x: Vec2| (1.0 - x.norm_squared()) * p(x);
        let h = 1e-4;
        let jet = move |x: Vec2| {
            let e1 = Vec2::new(h, 0.0);
            let e2 = Vec2::new(0.0, h);
            let fx = (f(x + e1) - f(x - e1)) / (2.0 * h);
            let fy = (f(x + e2) - f(x - e2)) / (2.0 * h);
            let fxx = (f(x + e1) - 2.0 * f(x) + f(x - e1)) / (h * h);
            let fyy = (f(x + e2) - 2.0 * f(x) + f(x - e2)) / (h * h);
            let fxy = (f(x + e1 + e2) - f(x + e1 - e2) - f(x - e1 + e2) + f(x - e1 - e2)) / (4.0 * h * h);
            Jet2 {
                value: f(x),
                grad: Vec2::new(fx, fy),
                hess: nalgebra::Matrix2::new(fxx, fxy, fxy, fyy),
            }
        };
        let s = space();
        let qi = quasi_interpolate(&s, &jet).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..200 {
            let r = rng.random_range(0.0f64..1.0).sqrt();
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let x = Vec2::new(r * th.cos(), r * th.sin());
            assert!((qi.eval(x).unwrap() - f(x)).abs() < 1e-6, "at {x:?}");
        }
    }
}
