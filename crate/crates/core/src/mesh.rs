//! Curved triangulations of piecewise-conic domains.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bernstein::{cross, Triangle, Vec2};
use crate::error::{Error, Result};
use crate::geometry::{arc_point_on_ray, normalized_conic, Conic, ConicDomain, DomainFile};

/// Number of rays used to test that a pie triangle is star-shaped.
pub const STAR_SAMPLES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriClass {
    Ordinary,
    Buffer,
    Pie,
}

/// A triangle of the mesh.
///
/// Pie triangles store their interior vertex in slot 0 and the two boundary vertices in
/// counter-clockwise order after it. Buffer triangles store their boundary vertex in slot 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRecord {
    pub v: [usize; 3],
    pub class: TriClass,
    /// Boundary arc carrying the curved edge (pie triangles only).
    pub arc: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    /// Endpoints, smaller index first.
    pub v: [usize; 2],
    /// Incident triangles, smaller index first.
    pub tris: [Option<usize>; 2],
    /// Arc index for boundary edges.
    pub arc: Option<usize>,
}

impl EdgeRecord {
    pub fn is_boundary(&self) -> bool {
        self.tris[1].is_none()
    }
}

/// An unvalidated triangulation: coordinates and index triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Simplex {
    Vertex(usize),
    Edge(usize),
    Triangle(usize),
}

/// A validated triangulation with classified triangles and derived vertex/edge sets.
#[derive(Clone, Debug)]
pub struct CurvedTriangulation {
    pub domain: ConicDomain,
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<TriangleRecord>,
    pub edges: Vec<EdgeRecord>,
    /// `tri_edges[t][i]` is the edge opposite slot `i` of triangle `t`.
    pub tri_edges: Vec<[usize; 3]>,
    pub vertex_tris: Vec<Vec<usize>>,
    pub on_boundary: Vec<bool>,
    /// Membership in the set of boundary vertices with a tangent line.
    pub tangent: Vec<bool>,
    /// For boundary vertices: the arcs entering and leaving the vertex.
    pub vertex_arcs: Vec<Option<(usize, usize)>>,
    edge_index: HashMap<(usize, usize), usize>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn violation(condition: &'static str, simplex: String, message: impl Into<String>) -> Error {
    Error::MeshCondition {
        condition,
        simplex,
        message: message.into(),
    }
}

impl CurvedTriangulation {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&key(a, b)).copied()
    }

    /// The straight triangle spanned by the vertices (the chord triangle for pies).
    pub fn chord_triangle(&self, t: usize) -> Triangle {
        let v = self.triangles[t].v;
        Triangle::new(self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]])
    }

    pub fn class(&self, t: usize) -> TriClass {
        self.triangles[t].class
    }

    /// Conic of a pie triangle, scaled to equal 1 at its interior vertex.
    pub fn pie_conic(&self, t: usize) -> Result<Conic> {
        let arc = self.triangles[t]
            .arc
            .ok_or_else(|| Error::Space(format!("triangle {t} is not a pie triangle")))?;
        normalized_conic(&self.domain.arcs[arc].conic, &self.chord_triangle(t))
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.on_boundary[v]).collect()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.on_boundary[v]).collect()
    }

    pub fn tangent_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.tangent[v]).collect()
    }

    pub fn triangles_of(&self, class: TriClass) -> Vec<usize> {
        (0..self.n_triangles())
            .filter(|&t| self.triangles[t].class == class)
            .collect()
    }

    fn edge_classes(&self, e: usize) -> Option<(TriClass, TriClass)> {
        let [a, b] = self.edges[e].tris;
        Some((self.class(a?), self.class(b?)))
    }

    /// Interior edges shared by a pie and a buffer triangle.
    pub fn pie_buffer_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                matches!(
                    self.edge_classes(e),
                    Some((TriClass::Pie, TriClass::Buffer)) | Some((TriClass::Buffer, TriClass::Pie))
                )
            })
            .collect()
    }

    /// Interior edges not shared by a pie and a buffer triangle.
    pub fn regular_interior_edges(&self) -> Vec<usize> {
        let pb: BTreeSet<usize> = self.pie_buffer_edges().into_iter().collect();
        (0..self.edges.len())
            .filter(|&e| !self.edges[e].is_boundary() && !pb.contains(&e))
            .collect()
    }

    /// Designated triangle of an interior vertex: the lowest-index ordinary triangle.
    pub fn vertex_owner(&self, v: usize) -> Option<usize> {
        self.vertex_tris[v]
            .iter()
            .copied()
            .filter(|&t| self.class(t) == TriClass::Ordinary)
            .min()
    }

    /// Designated pie triangle of a tangent boundary vertex: the lower-index pie.
    pub fn boundary_vertex_owner(&self, v: usize) -> Option<usize> {
        self.vertex_tris[v]
            .iter()
            .copied()
            .filter(|&t| self.class(t) == TriClass::Pie)
            .min()
    }

    /// Designated triangle of an interior edge: the lowest-index ordinary neighbour.
    pub fn edge_owner(&self, e: usize) -> Option<usize> {
        self.edges[e]
            .tris
            .iter()
            .flatten()
            .copied()
            .filter(|&t| self.class(t) == TriClass::Ordinary)
            .min()
    }

    /// Slot of vertex `v` in triangle `t`.
    pub fn slot(&self, t: usize, v: usize) -> Option<usize> {
        self.triangles[t].v.iter().position(|&x| x == v)
    }

    /// The other triangle across edge `e` from `t`.
    pub fn across(&self, t: usize, e: usize) -> Option<usize> {
        let [a, b] = self.edges[e].tris;
        if a == Some(t) {
            b
        } else if b == Some(t) {
            a
        } else {
            None
        }
    }

    /// `st^ℓ(A)`: triangles meeting `A`, iterated `ℓ` times.
    pub fn star(&self, set: &[Simplex], ell: usize) -> BTreeSet<usize> {
        assert!(ell >= 1, "star order must be positive");
        let mut verts = BTreeSet::new();
        for s in set {
            match *s {
                Simplex::Vertex(v) => {
                    verts.insert(v);
                }
                Simplex::Edge(e) => verts.extend(self.edges[e].v),
                Simplex::Triangle(t) => verts.extend(self.triangles[t].v),
            }
        }
        let mut tris = BTreeSet::new();
        for _ in 0..ell {
            tris = verts
                .iter()
                .flat_map(|&v| self.vertex_tris[v].iter().copied())
                .collect();
            verts = tris.iter().flat_map(|&t| self.triangles[t].v).collect();
        }
        tris
    }

    /// Barycentric coordinates of `x` if it lies in triangle `t` (in the curved region for
    /// pie triangles).
    pub fn contains(&self, t: usize, x: Vec2) -> Option<[f64; 3]> {
        let tol = 1e-12;
        let tri = self.chord_triangle(t);
        let b = tri.barycentric_unchecked(x);
        match self.triangles[t].class {
            TriClass::Pie => {
                if b[1] < -tol || b[2] < -tol || b[1] + b[2] > 4.0 {
                    return None;
                }
                let arc = &self.domain.arcs[self.triangles[t].arc?];
                let q = arc.conic.eval(x);
                (q >= -1e-12 * arc.conic.local_scale(x)).then_some(b)
            }
            _ => (b.iter().all(|&c| c >= -tol)).then_some(b),
        }
    }

    /// Finds a triangle containing `x` (curved region for pies) and its barycentric
    /// coordinates with respect to the (chord) triangle.
    pub fn locate(&self, x: Vec2, hint: Option<usize>) -> Result<(usize, [f64; 3])> {
        let mut t = hint.unwrap_or(0).min(self.n_triangles() - 1);
        for _ in 0..self.n_triangles().min(4096) {
            if let Some(b) = self.contains(t, x) {
                return Ok((t, b));
            }
            let b = self.chord_triangle(t).barycentric_unchecked(x);
            let worst = (0..3).min_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
            match self.across(t, self.tri_edges[t][worst]) {
                Some(n) => t = n,
                None => break,
            }
        }
        (0..self.n_triangles())
            .find_map(|t| self.contains(t, x).map(|b| (t, b)))
            .ok_or(Error::PointLocation { x: x.x, y: x.y })
    }

    /// Radial parametrization of the curved region of pie triangle `t`:
    /// `x(r, s) = w + r (γ(s) − w)`, where `γ(s)` is the arc point on the ray from the
    /// interior vertex `w` through `b1 + s (b2 − b1)`. Returns the point and the Jacobian
    /// determinant of `(r, s) ↦ x` on `[0, 1]²`.
    pub fn pie_point(&self, t: usize, r: f64, s: f64) -> Result<(Vec2, f64)> {
        let rec = &self.triangles[t];
        let arc = rec
            .arc
            .ok_or_else(|| Error::Space(format!("triangle {t} is not a pie triangle")))?;
        let [w, b1, b2] = rec.v.map(|i| self.vertices[i]);
        let c = b1 + (b2 - b1) * s;
        let d = c - w;
        let g = if s == 0.0 {
            b1
        } else if s == 1.0 {
            b2
        } else {
            arc_point_on_ray(&self.domain.arcs[arc], w, c)?
        };
        let rho = (g - w).norm() / d.norm();
        Ok((w + (g - w) * r, r * rho * rho * cross(d, b2 - b1)))
    }

    pub fn to_raw(&self) -> RawMesh {
        RawMesh {
            vertices: self.vertices.iter().map(|v| [v.x, v.y]).collect(),
            triangles: self.triangles.iter().map(|t| t.v).collect(),
        }
    }

    pub fn to_file(&self) -> MeshFile {
        MeshFile {
            domain: self.domain.to_file(),
            vertices: self.vertices.iter().map(|v| [v.x, v.y]).collect(),
            triangles: self.triangles.iter().map(|t| t.v).collect(),
            boundary_arcs: Some(
                self.edges
                    .iter()
                    .filter_map(|e| e.arc.map(|a| [e.v[0], e.v[1], a]))
                    .collect(),
            ),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(s)?;
        f.into_mesh()
    }

    /// Counts (interior vertices, regular interior edges, tangent boundary vertices, pie
    /// triangles, buffer triangles).
    pub fn category_counts(&self) -> [usize; 5] {
        [
            self.interior_vertices().len(),
            self.regular_interior_edges().len(),
            self.tangent_vertices().len(),
            self.triangles_of(TriClass::Pie).len(),
            self.triangles_of(TriClass::Buffer).len(),
        ]
    }

    pub fn area_of_chords(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.chord_triangle(t).signed_area())
            .sum()
    }
}

/// Bucket grid over the triangles' bounding boxes for repeated point location.
#[derive(Clone, Debug)]
pub struct PointLocator {
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &CurvedTriangulation) -> Self {
        let boxes: Vec<(Vec2, Vec2)> = (0..mesh.n_triangles())
            .map(|t| {
                let mut pts: Vec<Vec2> = mesh.chord_triangle(t).v.to_vec();
                if mesh.class(t) == TriClass::Pie {
                    for k in 1..16 {
                        if let Ok((x, _)) = mesh.pie_point(t, 1.0, k as f64 / 16.0) {
                            pts.push(x);
                        }
                    }
                }
                let mut lo = pts[0];
                let mut hi = pts[0];
                for p in &pts {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                // margin for the curved edge between samples
                let pad = 0.05 * (hi - lo).norm();
                (lo - Vec2::repeat(pad), hi + Vec2::repeat(pad))
            })
            .collect();
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for (a, b) in &boxes {
            lo = lo.inf(a);
            hi = hi.sup(b);
        }
        let n = (mesh.n_triangles() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi - lo).max() / n).max(f64::MIN_POSITIVE);
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (t, (a, b)) in boxes.iter().enumerate() {
            let (i0, j0) = (((a.x - lo.x) / cell) as usize, ((a.y - lo.y) / cell) as usize);
            let (i1, j1) = (((b.x - lo.x) / cell) as usize, ((b.y - lo.y) / cell) as usize);
            for i in i0..=i1.min(nx - 1) {
                for j in j0..=j1.min(ny - 1) {
                    cells[i * ny + j].push(t);
                }
            }
        }
        Self {
            lo,
            cell,
            nx,
            ny,
            cells,
        }
    }

    /// Like [`CurvedTriangulation::locate`]; points within round-off outside every
    /// triangle go to the candidate with the largest smallest barycentric coordinate.
    pub fn locate(&self, mesh: &CurvedTriangulation, x: Vec2) -> Result<(usize, [f64; 3])> {
        let i = ((x.x - self.lo.x) / self.cell).floor();
        let j = ((x.y - self.lo.y) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return Err(Error::PointLocation { x: x.x, y: x.y });
        }
        let cand = &self.cells[i as usize * self.ny + j as usize];
        if let Some(found) = cand.iter().find_map(|&t| mesh.contains(t, x).map(|b| (t, b))) {
            return Ok(found);
        }
        // pies are only bounded by their two straight edges here
        let score = |t: usize, b: &[f64; 3]| match mesh.class(t) {
            TriClass::Pie => b[1].min(b[2]),
            _ => b[0].min(b[1]).min(b[2]),
        };
        cand.iter()
            .map(|&t| (t, mesh.chord_triangle(t).barycentric_unchecked(x)))
            .map(|(t, b)| (t, b, score(t, &b)))
            .filter(|&(_, _, s)| s > -1e-8)
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(t, b, _)| (t, b))
            .ok_or(Error::PointLocation { x: x.x, y: x.y })
    }
}

/// Mesh document: the domain plus a raw triangulation, optionally with the arc index of
/// each boundary edge as `[a, b, arc]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub domain: DomainFile,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_arcs: Option<Vec<[usize; 3]>>,
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<CurvedTriangulation> {
        let domain = self.domain.into_domain()?;
        let raw = RawMesh {
            vertices: self.vertices,
            triangles: self.triangles,
        };
        let mesh = classify_and_validate(&domain, &raw)?;
        if let Some(list) = self.boundary_arcs {
            for [a, b, arc] in list {
                let e = mesh
                    .edge(a, b)
                    .ok_or_else(|| violation("f", format!("edge ({a}, {b})"), "listed boundary edge does not exist"))?;
                if mesh.edges[e].arc != Some(arc) {
                    return Err(violation(
                        "a",
                        format!("edge ({a}, {b})"),
                        format!(
                            "listed on arc {arc}, but the boundary walk places it on {:?}",
                            mesh.edges[e].arc
                        ),
                    ));
                }
            }
        }
        Ok(mesh)
    }
}

/// Builds adjacency, classifies triangles and checks conditions (a)–(g).
pub fn classify_and_validate(domain: &ConicDomain, raw: &RawMesh) -> Result<CurvedTriangulation> {
    let vertices: Vec<Vec2> = raw.vertices.iter().map(|p| Vec2::new(p[0], p[1])).collect();
    let nv = vertices.len();
    if raw.triangles.is_empty() {
        return Err(violation("T", "mesh".into(), "no triangles"));
    }
    let scale = vertices.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1.0);

    // orientation and basic triangle checks
    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(raw.triangles.len());
    for (t, tri) in raw.triangles.iter().enumerate() {
        if tri.iter().any(|&i| i >= nv) {
            return Err(violation("T", format!("triangle {t}"), "vertex index out of range"));
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(violation("T", format!("triangle {t}"), "repeated vertex"));
        }
        let geo = Triangle::new(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        geo.check()
            .map_err(|e| violation("T", format!("triangle {t}"), e.to_string()))?;
        tris.push(if geo.signed_area() > 0.0 {
            *tri
        } else {
            [tri[0], tri[2], tri[1]]
        });
    }

    // edges
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<EdgeRecord> = Vec::new();
    for (t, tri) in tris.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let e = *edge_index.entry((a, b)).or_insert_with(|| {
                edges.push(EdgeRecord {
                    v: [a, b],
                    tris: [None, None],
                    arc: None,
                });
                edges.len() - 1
            });
            let rec = &mut edges[e];
            if rec.tris[0].is_none() {
                rec.tris[0] = Some(t);
            } else if rec.tris[1].is_none() {
                rec.tris[1] = Some(t);
            } else {
                return Err(violation(
                    "T",
                    format!("edge ({a}, {b})"),
                    "edge shared by more than two triangles",
                ));
            }
        }
    }

    let mut vertex_tris = vec![Vec::new(); nv];
    for (t, tri) in tris.iter().enumerate() {
        for &v in tri {
            vertex_tris[v].push(t);
        }
    }
    if let Some(v) = (0..nv).find(|&v| vertex_tris[v].is_empty()) {
        return Err(violation("T", format!("vertex {v}"), "vertex belongs to no triangle"));
    }

    // boundary loop, oriented counter-clockwise
    let mut next_on_boundary: Vec<Option<usize>> = vec![None; nv];
    let mut on_boundary = vec![false; nv];
    for rec in &edges {
        if let [Some(t), None] = rec.tris {
            let tri = tris[t];
            let i = tri.iter().position(|&x| x == rec.v[0]).unwrap();
            let (from, to) = if tri[(i + 1) % 3] == rec.v[1] {
                (rec.v[0], rec.v[1])
            } else {
                (rec.v[1], rec.v[0])
            };
            if next_on_boundary[from].is_some() {
                return Err(violation(
                    "T",
                    format!("vertex {from}"),
                    "boundary is not a simple closed curve",
                ));
            }
            next_on_boundary[from] = Some(to);
            on_boundary[from] = true;
            on_boundary[to] = true;
        }
    }
    let boundary_count = on_boundary.iter().filter(|&&b| b).count();
    let start = (0..nv)
        .find(|&v| on_boundary[v])
        .ok_or_else(|| violation("T", "mesh".into(), "no boundary"))?;
    let mut loop_len = 0;
    let mut cur = start;
    loop {
        cur =
            next_on_boundary[cur].ok_or_else(|| violation("T", format!("vertex {cur}"), "boundary chain is broken"))?;
        loop_len += 1;
        if cur == start || loop_len > nv {
            break;
        }
    }
    if cur != start || loop_len != boundary_count {
        return Err(violation(
            "T",
            "boundary".into(),
            "boundary has more than one component",
        ));
    }

    // Euler characteristic of a disk and angle sums at interior vertices rule out
    // overlapping triangles for a consistently oriented mesh.
    let euler = nv as isize - edges.len() as isize + tris.len() as isize;
    if euler != 1 {
        return Err(violation(
            "T",
            "mesh".into(),
            format!("Euler characteristic {euler}, expected 1"),
        ));
    }
    let mut angle = vec![0.0f64; nv];
    for tri in &tris {
        for i in 0..3 {
            let p = vertices[tri[i]];
            let a = vertices[tri[(i + 1) % 3]] - p;
            let b = vertices[tri[(i + 2) % 3]] - p;
            angle[tri[i]] += cross(a, b).atan2(a.dot(&b));
        }
    }
    for v in 0..nv {
        if !on_boundary[v] && (angle[v] - 2.0 * PI).abs() > 1e-8 {
            return Err(violation(
                "T",
                format!("vertex {v}"),
                format!("triangles around the vertex overlap (angle sum {})", angle[v]),
            ));
        }
    }

    // (a): arc endpoints are vertices; then walk the boundary assigning arcs
    let corners = domain.corners();
    let ncorner = corners.len();
    let corner_vertex: Vec<usize> = corners
        .iter()
        .enumerate()
        .map(|(j, z)| {
            (0..nv)
                .filter(|&v| on_boundary[v])
                .find(|&v| (vertices[v] - z).norm() <= 1e-10 * scale)
                .ok_or_else(|| {
                    violation(
                        "a",
                        format!("corner {j} ({}, {})", z.x, z.y),
                        "arc endpoint is not a boundary vertex",
                    )
                })
        })
        .collect::<Result<_>>()?;
    let mut vertex_arcs: Vec<Option<(usize, usize)>> = vec![None; nv];
    let mut arc = 0usize;
    let mut cur = corner_vertex[0];
    let mut steps = 0;
    loop {
        let nxt = next_on_boundary[cur].unwrap();
        let e = edge_index[&key(cur, nxt)];
        edges[e].arc = Some(arc);
        let incoming = vertex_arcs[cur].map(|x| x.0).unwrap_or((arc + ncorner - 1) % ncorner);
        vertex_arcs[cur] = Some((incoming, arc));
        let conic = &domain.arcs[arc].conic;
        if !conic.contains(vertices[nxt]) {
            return Err(violation(
                "a",
                format!("vertex {nxt}"),
                format!("boundary vertex is off arc {arc} (q = {:e})", conic.eval(vertices[nxt])),
            ));
        }
        let mut next_arc = arc;
        if nxt == corner_vertex[(arc + 1) % ncorner] {
            next_arc = (arc + 1) % ncorner;
        } else if corner_vertex.contains(&nxt) {
            return Err(violation(
                "a",
                format!("vertex {nxt}"),
                "corners are not met in counter-clockwise order",
            ));
        }
        vertex_arcs[nxt] = Some((arc, next_arc));
        arc = next_arc;
        cur = nxt;
        steps += 1;
        if cur == corner_vertex[0] {
            break;
        }
        if steps > nv {
            return Err(violation("a", "boundary".into(), "arc walk did not close"));
        }
    }
    if arc != 0 {
        return Err(violation(
            "a",
            "boundary".into(),
            "boundary walk does not visit every arc",
        ));
    }
    for (e, rec) in edges.iter().enumerate() {
        if rec.is_boundary() {
            let a = rec.arc.unwrap();
            if domain.arcs[a].conic.degree() < 2 {
                return Err(violation(
                    "f",
                    format!("edge {e} ({}, {})", rec.v[0], rec.v[1]),
                    "boundary edge lies on a straight line",
                ));
            }
        }
    }

    // (b)
    for rec in &edges {
        if !rec.is_boundary() && on_boundary[rec.v[0]] && on_boundary[rec.v[1]] {
            return Err(violation(
                "b",
                format!("edge ({}, {})", rec.v[0], rec.v[1]),
                "interior edge has both endpoints on the boundary",
            ));
        }
    }

    // classification
    let mut tri_edges = vec![[0usize; 3]; tris.len()];
    for (t, tri) in tris.iter().enumerate() {
        for i in 0..3 {
            tri_edges[t][i] = edge_index[&key(tri[(i + 1) % 3], tri[(i + 2) % 3])];
        }
    }
    let mut records: Vec<TriangleRecord> = Vec::with_capacity(tris.len());
    for (t, tri) in tris.iter().enumerate() {
        let curved: Vec<usize> = (0..3).filter(|&i| edges[tri_edges[t][i]].is_boundary()).collect();
        match curved.as_slice() {
            [] => records.push(TriangleRecord {
                v: *tri,
                class: TriClass::Ordinary,
                arc: None,
            }),
            [i] => {
                let i = *i;
                records.push(TriangleRecord {
                    v: [tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]],
                    class: TriClass::Pie,
                    arc: edges[tri_edges[t][i]].arc,
                });
            }
            _ => {
                return Err(violation(
                    "b",
                    format!("triangle {t}"),
                    "triangle has more than one boundary edge",
                ))
            }
        }
    }
    for rec in &edges {
        if let [Some(a), Some(b)] = rec.tris {
            if records[a].class == TriClass::Pie && records[b].class == TriClass::Pie {
                return Err(violation(
                    "c",
                    format!("edge ({}, {})", rec.v[0], rec.v[1]),
                    format!("pie triangles {a} and {b} share an edge"),
                ));
            }
        }
    }
    for rec in &edges {
        if let [Some(a), Some(b)] = rec.tris {
            for (x, y) in [(a, b), (b, a)] {
                if records[x].class == TriClass::Pie && records[y].class == TriClass::Ordinary {
                    records[y].class = TriClass::Buffer;
                }
            }
        }
    }
    for rec in &edges {
        if let [Some(a), Some(b)] = rec.tris {
            if records[a].class == TriClass::Buffer && records[b].class == TriClass::Buffer {
                return Err(violation(
                    "g",
                    format!("edge ({}, {})", rec.v[0], rec.v[1]),
                    format!("buffer triangles {a} and {b} share an edge"),
                ));
            }
        }
    }
    for v in 0..nv {
        if !on_boundary[v] {
            continue;
        }
        let classes: Vec<TriClass> = vertex_tris[v].iter().map(|&t| records[t].class).collect();
        let buffers = classes.iter().filter(|&&c| c == TriClass::Buffer).count();
        if classes.len() != 3 || buffers != 1 {
            return Err(violation(
                "g",
                format!("vertex {v}"),
                format!(
                    "boundary vertex must carry two pie triangles and one buffer triangle, found {} triangles with {buffers} buffers",
                    classes.len()
                ),
            ));
        }
    }
    for (t, rec) in records.iter_mut().enumerate() {
        if rec.class == TriClass::Buffer {
            let b: Vec<usize> = (0..3).filter(|&i| on_boundary[rec.v[i]]).collect();
            if b.len() != 1 {
                return Err(violation(
                    "b",
                    format!("triangle {t}"),
                    "buffer triangle must have exactly one boundary vertex",
                ));
            }
            let i = b[0];
            rec.v = [rec.v[i], rec.v[(i + 1) % 3], rec.v[(i + 2) % 3]];
        }
    }
    let tri_edges: Vec<[usize; 3]> = records
        .iter()
        .map(|r| {
            let v = r.v;
            [
                edge_index[&key(v[1], v[2])],
                edge_index[&key(v[0], v[2])],
                edge_index[&key(v[0], v[1])],
            ]
        })
        .collect();
    for v in 0..nv {
        if !on_boundary[v] && !vertex_tris[v].iter().any(|&t| records[t].class == TriClass::Ordinary) {
            return Err(violation(
                "g",
                format!("vertex {v}"),
                "interior vertex has no ordinary triangle",
            ));
        }
    }

    // (d), (e)
    for (t, rec) in records.iter().enumerate() {
        if rec.class != TriClass::Pie {
            continue;
        }
        let arc = &domain.arcs[rec.arc.unwrap()];
        let (w, b1, b2) = (vertices[rec.v[0]], vertices[rec.v[1]], vertices[rec.v[2]]);
        let chord = Triangle::new(w, b1, b2);
        let mut prev = 0.0;
        for s in 0..=STAR_SAMPLES {
            let tau = s as f64 / STAR_SAMPLES as f64;
            let c = b1 * (1.0 - tau) + b2 * tau;
            let x =
                arc_point_on_ray(arc, w, c).map_err(|e| violation("d", format!("pie triangle {t}"), e.to_string()))?;
            let b = chord.barycentric_unchecked(x);
            let frac = b[2] / (b[1] + b[2]);
            if b[1] < -1e-10 || b[2] < -1e-10 || frac < prev - 1e-12 {
                return Err(violation(
                    "d",
                    format!("pie triangle {t}"),
                    "curved edge leaves the wedge at the interior vertex",
                ));
            }
            prev = frac;
            if s > 0 && s < STAR_SAMPLES && s % 5 == 0 {
                for r in [0.3, 0.7] {
                    let y = w + (x - w) * r;
                    if arc.conic.eval(y) <= 0.0 {
                        return Err(violation(
                            "e",
                            format!("pie triangle {t}"),
                            "conic is not positive inside the pie triangle",
                        ));
                    }
                }
            }
        }
    }

    let mut tangent = vec![false; nv];
    for v in 0..nv {
        if on_boundary[v] {
            tangent[v] = match corner_vertex.iter().position(|&c| c == v) {
                Some(j) => domain.is_tangent_corner(j),
                None => true,
            };
        }
    }

    // re-sort incident triangle lists and edge slots
    for rec in edges.iter_mut() {
        if let [Some(a), Some(b)] = rec.tris {
            if b < a {
                rec.tris = [Some(b), Some(a)];
            }
        }
    }
    for list in vertex_tris.iter_mut() {
        list.sort_unstable();
    }

    Ok(CurvedTriangulation {
        domain: domain.clone(),
        vertices,
        triangles: records,
        edges,
        tri_edges,
        vertex_tris,
        on_boundary,
        tangent,
        vertex_arcs,
        edge_index,
    })
}

/// Uniform refinement that also returns the parent of each child triangle.
///
/// Children of triangle `t = <a, b, c>` are `4t..4t+3`: `<a, m_ab, m_ca>`,
/// `<m_ab, b, m_bc>`, `<m_ca, m_bc, c>` and the central `<m_bc, m_ca, m_ab>`. A curved
/// edge is split where the ray from the pie triangle's interior vertex through the chord
/// midpoint meets the arc.
pub fn refine_with_parents(mesh: &CurvedTriangulation) -> Result<(CurvedTriangulation, Vec<usize>)> {
    let mut vertices = mesh.vertices.clone();
    let mut mid = vec![usize::MAX; mesh.edges.len()];
    for (e, rec) in mesh.edges.iter().enumerate() {
        let (a, b) = (mesh.vertices[rec.v[0]], mesh.vertices[rec.v[1]]);
        let m = 0.5 * (a + b);
        let p = match rec.arc {
            None => m,
            Some(arc) => {
                let t = rec.tris[0].unwrap();
                let w = mesh.vertices[mesh.triangles[t].v[0]];
                arc_point_on_ray(&mesh.domain.arcs[arc], w, m)
                    .map_err(|err| violation("d", format!("edge {e}"), format!("cannot split curved edge: {err}")))?
            }
        };
        vertices.push(p);
        mid[e] = vertices.len() - 1;
    }
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut parents = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, rec) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = rec.v;
        let m_ab = mid[mesh.edge(a, b).unwrap()];
        let m_bc = mid[mesh.edge(b, c).unwrap()];
        let m_ca = mid[mesh.edge(c, a).unwrap()];
        triangles.push([a, m_ab, m_ca]);
        triangles.push([m_ab, b, m_bc]);
        triangles.push([m_ca, m_bc, c]);
        triangles.push([m_bc, m_ca, m_ab]);
        parents.extend([t; 4]);
    }
    let raw = RawMesh {
        vertices: vertices.iter().map(|v| [v.x, v.y]).collect(),
        triangles,
    };
    let fine = classify_and_validate(&mesh.domain, &raw)?;
    Ok((fine, parents))
}

pub fn refine_uniform(mesh: &CurvedTriangulation) -> Result<CurvedTriangulation> {
    refine_with_parents(mesh).map(|(m, _)| m)
}
