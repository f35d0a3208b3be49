//! Symbolic propagation of determining-set values to every BB coefficient.
//!
//! Every coefficient is computed as a [`Lin`] over the degrees of freedom, so that one
//! pass over the mesh yields the linear map from dof values to patch coefficients.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::jets::{jet_to_ring_matrix, quartic_ring_matrix, ring_to_jet_matrix};
use super::lin::Lin;
use super::{DofCategory, DofDescriptor, MinimalDeterminingSet, PatchMap};
use crate::bernstein::{d2_ring, dim, index, multi_indices, product_weight, DomainPointIndex, Triangle};
use crate::error::{Error, Result};
use crate::geometry::normalized_conic_bb_form;
use crate::mesh::{CurvedTriangulation, Simplex, TriClass};

/// Relative size of an inconsistency between two routes to the same coefficient above
/// which propagation is aborted.
const HARD_DEFECT: f64 = 1e-6;

pub(crate) struct Propagation {
    pub mds: MinimalDeterminingSet,
    pub maps: Vec<PatchMap>,
    pub pie_q: Vec<Option<[f64; 6]>>,
    pub max_defect: f64,
}

struct Builder<'m> {
    mesh: &'m CurvedTriangulation,
    coef: Vec<Vec<Option<Lin>>>,
    pcoef: Vec<Vec<Option<Lin>>>,
    qbb: Vec<Option<[f64; 6]>>,
    defect: f64,
    dofs: Vec<DofDescriptor>,
}

pub fn degree_of(class: TriClass) -> usize {
    match class {
        TriClass::Ordinary => 5,
        TriClass::Buffer | TriClass::Pie => 6,
    }
}

fn set_slot(slot: &mut Option<Lin>, lin: Lin, defect: &mut f64, what: impl Fn() -> String) -> Result<()> {
    match slot {
        None => {
            *slot = Some(lin);
            Ok(())
        }
        Some(old) => {
            let scale = old.max_abs().max(lin.max_abs()).max(1.0);
            let d = lin.sub(old).max_abs() / scale;
            *defect = defect.max(d);
            if d > HARD_DEFECT {
                return Err(Error::Space(format!(
                    "inconsistent values for {} (relative defect {d:e})",
                    what()
                )));
            }
            Ok(())
        }
    }
}

impl<'m> Builder<'m> {
    fn new(mesh: &'m CurvedTriangulation) -> Result<Self> {
        let mut qbb = vec![None; mesh.n_triangles()];
        let mut coef = Vec::with_capacity(mesh.n_triangles());
        let mut pcoef = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let class = mesh.class(t);
            coef.push(vec![None; dim(degree_of(class))]);
            if class == TriClass::Pie {
                pcoef.push(vec![None; dim(4)]);
                let arc = mesh.triangles[t].arc.expect("pie triangle without arc");
                qbb[t] = Some(normalized_conic_bb_form(
                    &mesh.domain.arcs[arc].conic,
                    &mesh.chord_triangle(t),
                )?);
            } else {
                pcoef.push(Vec::new());
            }
        }
        Ok(Self {
            mesh,
            coef,
            pcoef,
            qbb,
            defect: 0.0,
            dofs: Vec::new(),
        })
    }

    fn deg(&self, t: usize) -> usize {
        degree_of(self.mesh.class(t))
    }

    /// Exponent vector of triangle `t` given powers of its vertices (by vertex id).
    fn ex(&self, t: usize, parts: &[(usize, usize)]) -> [usize; 3] {
        let mut e = [0; 3];
        for &(v, p) in parts {
            let s = self.mesh.slot(t, v).expect("vertex not in triangle");
            e[s] += p;
        }
        e
    }

    fn set(&mut self, t: usize, e: [usize; 3], lin: Lin) -> Result<()> {
        let d = self.deg(t);
        let slot = &mut self.coef[t][index(d, e)];
        set_slot(slot, lin, &mut self.defect, || {
            format!("coefficient {e:?} of triangle {t}")
        })
    }

    fn set_p(&mut self, t: usize, e: [usize; 3], lin: Lin) -> Result<()> {
        let slot = &mut self.pcoef[t][index(4, e)];
        set_slot(slot, lin, &mut self.defect, || {
            format!("quartic factor coefficient {e:?} of pie triangle {t}")
        })
    }

    fn get(&self, t: usize, e: [usize; 3]) -> Result<&Lin> {
        self.coef[t][index(self.deg(t), e)]
            .as_ref()
            .ok_or_else(|| Error::Space(format!("coefficient {e:?} of triangle {t} is not yet known")))
    }

    fn get_p(&self, t: usize, e: [usize; 3]) -> Result<&Lin> {
        self.pcoef[t][index(4, e)].as_ref().ok_or_else(|| {
            Error::Space(format!(
                "quartic coefficient {e:?} of pie triangle {t} is not yet known"
            ))
        })
    }

    fn push_dof(
        &mut self,
        category: DofCategory,
        owner: Simplex,
        triangle: usize,
        point: [usize; 3],
        support: Vec<usize>,
    ) -> Lin {
        self.dofs.push(DofDescriptor {
            category,
            owner,
            triangle,
            point: DomainPointIndex(point),
            support,
        });
        Lin::dof(self.dofs.len() - 1)
    }

    /// Rows 0 and 1 of `dst` along the common edge `(va, vb)`, from the coefficients of
    /// `src` (degree `d`, given in lexicographic order).
    fn smooth_rows(
        &self,
        src: usize,
        src_coef: &[Option<Lin>],
        d: usize,
        dst: usize,
        va: usize,
        vb: usize,
    ) -> Result<Vec<([usize; 3], Lin)>> {
        let m = self.mesh;
        let src_tri = m.chord_triangle(src);
        let so = m.triangles[src]
            .v
            .iter()
            .copied()
            .find(|&x| x != va && x != vb)
            .unwrap();
        let dst_o = m.triangles[dst]
            .v
            .iter()
            .copied()
            .find(|&x| x != va && x != vb)
            .unwrap();
        let beta = src_tri.barycentric(m.vertices[dst_o])?;
        let (sa, sb, s_o) = (
            m.slot(src, va).unwrap(),
            m.slot(src, vb).unwrap(),
            m.slot(src, so).unwrap(),
        );
        let get = |parts: &[(usize, usize)]| -> Result<&Lin> {
            let e = self.ex(src, parts);
            src_coef[index(d, e)]
                .as_ref()
                .ok_or_else(|| Error::Space(format!("coefficient {e:?} of triangle {src} is not yet known")))
        };
        let mut out = Vec::with_capacity(2 * d + 1);
        for i in 0..=d {
            let c = get(&[(va, i), (vb, d - i)])?.clone();
            out.push((self.ex(dst, &[(va, i), (vb, d - i)]), c));
        }
        for i in 0..d {
            let n = d - 1 - i;
            let x1 = get(&[(va, i + 1), (vb, n)])?;
            let x2 = get(&[(va, i), (vb, n + 1)])?;
            let x3 = get(&[(va, i), (vb, n), (so, 1)])?;
            let lin = Lin::combo(&[(beta[sa], x1), (beta[sb], x2), (beta[s_o], x3)]);
            out.push((self.ex(dst, &[(va, i), (vb, n), (dst_o, 1)]), lin));
        }
        Ok(out)
    }

    /// Coefficient of the product `p q` at `gamma` (degree 6) from the quartic factor.
    fn product_at(&self, t: usize, gamma: [usize; 3]) -> Result<Lin> {
        let q = self.qbb[t].unwrap();
        let mut terms: Vec<(f64, &Lin)> = Vec::new();
        for (qi, beta) in multi_indices(2).into_iter().enumerate() {
            if q[qi] == 0.0 || (0..3).any(|k| beta[k] > gamma[k]) {
                continue;
            }
            let alpha = [gamma[0] - beta[0], gamma[1] - beta[1], gamma[2] - beta[2]];
            terms.push((product_weight(alpha, beta) * q[qi], self.get_p(t, alpha)?));
        }
        Ok(Lin::combo(&terms))
    }

    fn interior_vertices(&mut self) -> Result<()> {
        let m = self.mesh;
        for v in m.interior_vertices() {
            let tv = m
                .vertex_owner(v)
                .ok_or_else(|| Error::Space(format!("interior vertex {v} has no ordinary triangle")))?;
            let s = m.slot(tv, v).unwrap();
            let ring = d2_ring(5, s);
            let mut lins = Vec::with_capacity(6);
            for p in ring {
                let l = self.push_dof(DofCategory::InteriorVertex, Simplex::Vertex(v), tv, p.0, vec![tv]);
                lins.push(l);
            }
            let refs: Vec<&Lin> = lins.iter().collect();
            let jet = Lin::apply(&ring_to_jet_matrix(&m.chord_triangle(tv), s, 5), &refs);
            let jet_refs: Vec<&Lin> = jet.iter().collect();
            for &t in &m.vertex_tris[v] {
                let slot = m.slot(t, v).unwrap();
                let tri = m.chord_triangle(t);
                let d = self.deg(t);
                let r = Lin::apply(&jet_to_ring_matrix(&tri, slot, d), &jet_refs);
                for (p, l) in d2_ring(d, slot).iter().zip(r.iter()) {
                    self.set(t, p.0, l.clone())?;
                }
                if m.class(t) == TriClass::Pie {
                    if slot != 0 {
                        return Err(Error::Space(format!(
                            "interior vertex {v} is not the apex of pie triangle {t}"
                        )));
                    }
                    let q = self.qbb[t].unwrap();
                    // d2_ring order (600, 510, 501, 420, 402, 411) to lexicographic order
                    let a_lex = [&r[0], &r[1], &r[2], &r[3], &r[5], &r[4]];
                    let c = Lin::apply(&quartic_ring_matrix(q[1], q[2], q[4]), &a_lex);
                    let targets = [[4, 0, 0], [3, 1, 0], [3, 0, 1], [2, 2, 0], [2, 1, 1], [2, 0, 2]];
                    for (e, l) in targets.into_iter().zip(c) {
                        self.set_p(t, e, l)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn regular_edges(&mut self) -> Result<()> {
        let m = self.mesh;
        let edges = m.regular_interior_edges();
        let mut owners = Vec::with_capacity(edges.len());
        for &e in &edges {
            let te = m
                .edge_owner(e)
                .ok_or_else(|| Error::Space(format!("interior edge {e} has no ordinary neighbour")))?;
            let [a, b] = m.edges[e].v;
            let o = m.triangles[te].v.iter().copied().find(|&x| x != a && x != b).unwrap();
            let p = self.ex(te, &[(o, 1), (a, 2), (b, 2)]);
            let l = self.push_dof(DofCategory::InteriorEdge, Simplex::Edge(e), te, p, vec![te]);
            self.set(te, p, l)?;
            owners.push(te);
        }
        // ordinary neighbours first, buffer neighbours after
        for pass in [TriClass::Ordinary, TriClass::Buffer] {
            for (&e, &te) in edges.iter().zip(&owners) {
                let other = m.across(te, e).unwrap();
                if m.class(other) != pass {
                    continue;
                }
                let [a, b] = m.edges[e].v;
                let src = self.coef[te].clone();
                let (src, d) = if pass == TriClass::Buffer {
                    (raise_rows(&src, 5), 6)
                } else {
                    (src, 5)
                };
                for (ex, l) in self.smooth_rows(te, &src, d, other, a, b)? {
                    self.set(other, ex, l)?;
                }
            }
        }
        Ok(())
    }

    fn buffer_dofs(&mut self) {
        for t in self.mesh.triangles_of(TriClass::Buffer) {
            for p in [[4, 1, 1], [2, 2, 2]] {
                let l = self.push_dof(DofCategory::Buffer, Simplex::Triangle(t), t, p, vec![t]);
                self.coef[t][index(6, p)] = Some(l);
            }
        }
    }

    fn boundary_vertices(&mut self) -> Result<()> {
        let m = self.mesh;
        for v in m.boundary_vertices() {
            let pies: Vec<usize> = m.vertex_tris[v]
                .iter()
                .copied()
                .filter(|&t| m.class(t) == TriClass::Pie)
                .collect();
            if pies.len() != 2 {
                return Err(Error::Space(format!("boundary vertex {v} needs two pie triangles")));
            }
            if !m.tangent[v] {
                for &t in &pies {
                    let e = self.ex(t, &[(v, 4)]);
                    self.set_p(t, e, Lin::zero())?;
                }
                continue;
            }
            let own = m.boundary_vertex_owner(v).unwrap();
            let other = if pies[0] == own { pies[1] } else { pies[0] };
            let g_own = m.pie_conic(own)?.grad(m.vertices[v]);
            let g_oth = m.pie_conic(other)?.grad(m.vertices[v]);
            let k = if g_oth.x.abs() >= g_oth.y.abs() { 0 } else { 1 };
            let alpha = g_own[k] / g_oth[k];
            let e_own = self.ex(own, &[(v, 4)]);
            let l = self.push_dof(
                DofCategory::TangentBoundaryVertex,
                Simplex::Vertex(v),
                own,
                e_own,
                vec![own],
            );
            self.set_p(own, e_own, l.clone())?;
            let e_oth = self.ex(other, &[(v, 4)]);
            self.set_p(other, e_oth, l.scale(alpha))?;
        }
        Ok(())
    }

    fn pie_dofs(&mut self) -> Result<()> {
        for t in self.mesh.triangles_of(TriClass::Pie) {
            for p in [[1, 3, 0], [1, 2, 1], [1, 1, 2], [1, 0, 3], [0, 2, 2]] {
                let l = self.push_dof(DofCategory::Pie, Simplex::Triangle(t), t, p, vec![t]);
                self.set_p(t, p, l)?;
            }
        }
        Ok(())
    }

    fn pie_buffer_edges(&mut self) -> Result<()> {
        let m = self.mesh;
        for e in m.pie_buffer_edges() {
            let [t0, t1] = m.edges[e].tris.map(|x| x.unwrap());
            let (pie, buf) = if m.class(t0) == TriClass::Pie {
                (t0, t1)
            } else {
                (t1, t0)
            };
            let w = m.triangles[pie].v[0];
            let b0 = m.edges[e].v.iter().copied().find(|&x| x != w).unwrap();
            let b1 = m.triangles[pie].v.iter().copied().find(|&x| x != w && x != b0).unwrap();
            // the product on the shared edge, passed to the buffer by continuity
            for i in 0..=6 {
                let g = self.ex(pie, &[(w, i), (b0, 6 - i)]);
                let l = self.product_at(pie, g)?;
                self.set(pie, g, l.clone())?;
                let gb = self.ex(buf, &[(w, i), (b0, 6 - i)]);
                self.set(buf, gb, l)?;
            }
            // first-row coefficient next to the boundary vertex, from the buffer
            let target = self.ex(pie, &[(w, 1), (b0, 4), (b1, 1)]);
            let a_target = {
                let tri = m.chord_triangle(buf);
                let o = m.triangles[buf].v.iter().copied().find(|&x| x != w && x != b0).unwrap();
                let beta = tri.barycentric(m.vertices[b1])?;
                let (sw, sb, so) = (
                    m.slot(buf, w).unwrap(),
                    m.slot(buf, b0).unwrap(),
                    m.slot(buf, o).unwrap(),
                );
                let x1 = self.get(buf, self.ex(buf, &[(w, 2), (b0, 4)]))?;
                let x2 = self.get(buf, self.ex(buf, &[(w, 1), (b0, 5)]))?;
                let x3 = self.get(buf, self.ex(buf, &[(w, 1), (b0, 4), (o, 1)]))?;
                Lin::combo(&[(beta[sw], x1), (beta[sb], x2), (beta[so], x3)])
            };
            self.set(pie, target, a_target.clone())?;
            // solve the product identity at `target` for the chord coefficient
            let q = self.qbb[pie].unwrap();
            let unknown = self.ex(pie, &[(b1, 1), (b0, 3)]);
            let mut rest: Vec<(f64, &Lin)> = Vec::new();
            let mut kappa = 0.0;
            let qscale = q.iter().fold(0.0f64, |s, x| s.max(x.abs()));
            for (qi, beta) in multi_indices(2).into_iter().enumerate() {
                if (0..3).any(|k| beta[k] > target[k]) {
                    continue;
                }
                let alpha = [target[0] - beta[0], target[1] - beta[1], target[2] - beta[2]];
                let wgt = product_weight(alpha, beta) * q[qi];
                if alpha == unknown {
                    if q[qi].abs() <= 1e-12 * qscale {
                        return Err(Error::Geometry(format!(
                            "conic gradient vanishes at boundary vertex {b0} of pie triangle {pie}"
                        )));
                    }
                    kappa = wgt;
                } else if q[qi] != 0.0 {
                    rest.push((-wgt, self.get_p(pie, alpha)?));
                }
            }
            rest.push((1.0, &a_target));
            let solved = Lin::combo(&rest).scale(1.0 / kappa);
            self.set_p(pie, unknown, solved)?;
        }
        Ok(())
    }

    fn pie_products(&mut self) -> Result<()> {
        for t in self.mesh.triangles_of(TriClass::Pie) {
            for g in multi_indices(6) {
                let l = self.product_at(t, g)?;
                self.set(t, g, l)?;
            }
        }
        Ok(())
    }

    fn buffer_backfill(&mut self) -> Result<()> {
        let m = self.mesh;
        for e in m.pie_buffer_edges() {
            let [t0, t1] = m.edges[e].tris.map(|x| x.unwrap());
            let (pie, buf) = if m.class(t0) == TriClass::Pie {
                (t0, t1)
            } else {
                (t1, t0)
            };
            let [a, b] = m.edges[e].v;
            let src = self.coef[pie].clone();
            for (ex, l) in self.smooth_rows(pie, &src, 6, buf, a, b)? {
                self.set(buf, ex, l)?;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Propagation> {
        let mesh = self.mesh;
        let mut maps = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let coef: Vec<&Lin> = self.coef[t]
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    c.as_ref().ok_or_else(|| {
                        Error::Space(format!(
                            "coefficient {:?} of triangle {t} was never determined",
                            DomainPointIndex::from_position(degree_of(mesh.class(t)), i).0
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let pc: Vec<&Lin> = self.pcoef[t]
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    c.as_ref().ok_or_else(|| {
                        Error::Space(format!(
                            "quartic coefficient {:?} of pie triangle {t} was never determined",
                            DomainPointIndex::from_position(4, i).0
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let mut local: BTreeMap<u32, usize> = BTreeMap::new();
            for l in coef.iter().chain(pc.iter()) {
                for &(i, _) in &l.0 {
                    local.entry(i).or_insert(0);
                }
            }
            for (k, v) in local.values_mut().enumerate() {
                *v = k;
            }
            let dense = |rows: &[&Lin]| {
                let mut mat = DMatrix::zeros(rows.len(), local.len());
                for (r, l) in rows.iter().enumerate() {
                    for &(i, c) in &l.0 {
                        mat[(r, local[&i])] = c;
                    }
                }
                mat
            };
            maps.push(PatchMap {
                degree: degree_of(mesh.class(t)),
                dofs: local.keys().map(|&i| i as usize).collect(),
                coef: dense(&coef),
                p: (!pc.is_empty()).then(|| dense(&pc)),
            });
        }
        let mds = MinimalDeterminingSet::from_descriptors(self.dofs);
        Ok(Propagation {
            mds,
            maps,
            pie_q: self.qbb,
            max_defect: self.defect,
        })
    }
}

/// Degree raising 5 → 6 of those coefficients whose inputs are all known.
fn raise_rows(src: &[Option<Lin>], d: usize) -> Vec<Option<Lin>> {
    let dn = d + 1;
    let inv = 1.0 / dn as f64;
    multi_indices(dn)
        .into_iter()
        .map(|[i, j, k]| {
            let mut terms: Vec<(f64, &Lin)> = Vec::new();
            for (w, e) in [
                (i, [i.wrapping_sub(1), j, k]),
                (j, [i, j.wrapping_sub(1), k]),
                (k, [i, j, k.wrapping_sub(1)]),
            ] {
                if w == 0 {
                    continue;
                }
                terms.push((w as f64 * inv, src[index(d, e)].as_ref()?));
            }
            Some(Lin::combo(&terms))
        })
        .collect()
}

pub(crate) fn propagate_symbolic(mesh: &CurvedTriangulation) -> Result<Propagation> {
    if let Some(t) = (0..mesh.n_triangles()).find(|&t| Triangle::check(&mesh.chord_triangle(t)).is_err()) {
        return Err(Error::Space(format!("triangle {t} is degenerate")));
    }
    let mut b = Builder::new(mesh)?;
    b.interior_vertices()?;
    b.regular_edges()?;
    b.boundary_vertices()?;
    b.pie_dofs()?;
    b.buffer_dofs();
    b.pie_buffer_edges()?;
    b.pie_products()?;
    b.buffer_backfill()?;
    b.finish()
}
