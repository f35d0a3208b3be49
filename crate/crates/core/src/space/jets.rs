//! D₂-rings, second-order jets at vertices, and the pie-triangle ring solve.

use nalgebra::{DMatrix, Matrix2, Vector6};

use crate::bernstein::{other_slots, Jet2, Triangle, Vec2};

/// Jets are stored as `[s, s_x, s_y, s_xx, s_xy, s_yy]`.
pub type JetVec = Vector6<f64>;

pub fn jet_to_vec(j: &Jet2) -> JetVec {
    JetVec::new(
        j.value,
        j.grad.x,
        j.grad.y,
        j.hess[(0, 0)],
        j.hess[(0, 1)],
        j.hess[(1, 1)],
    )
}

pub fn vec_to_jet(v: &JetVec) -> Jet2 {
    Jet2 {
        value: v[0],
        grad: Vec2::new(v[1], v[2]),
        hess: Matrix2::new(v[3], v[4], v[4], v[5]),
    }
}

fn edge_vectors(tri: &Triangle, slot: usize) -> (Vec2, Vec2) {
    let (a, b) = other_slots(slot);
    (tri.v[a] - tri.v[slot], tri.v[b] - tri.v[slot])
}

/// Matrix taking a jet at vertex `slot` to the degree-`d` ring at that vertex (ring order
/// of [`crate::bernstein::d2_ring`]).
pub fn jet_to_ring_matrix(tri: &Triangle, slot: usize, d: usize) -> DMatrix<f64> {
    let (f1, f2) = edge_vectors(tri, slot);
    let df = d as f64;
    let dd = (d * (d - 1)) as f64;
    // rows of directional derivatives in terms of the jet
    let d1 = [0.0, f1.x, f1.y, 0.0, 0.0, 0.0];
    let d2 = [0.0, f2.x, f2.y, 0.0, 0.0, 0.0];
    let quad = |a: Vec2, b: Vec2| [0.0, 0.0, 0.0, a.x * b.x, a.x * b.y + a.y * b.x, a.y * b.y];
    let d11 = quad(f1, f1);
    let d22 = quad(f2, f2);
    let d12 = quad(f1, f2);
    let s = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut m = DMatrix::zeros(6, 6);
    for c in 0..6 {
        m[(0, c)] = s[c];
        m[(1, c)] = s[c] + d1[c] / df;
        m[(2, c)] = s[c] + d2[c] / df;
        m[(3, c)] = s[c] + 2.0 * d1[c] / df + d11[c] / dd;
        m[(4, c)] = s[c] + 2.0 * d2[c] / df + d22[c] / dd;
        m[(5, c)] = s[c] + (d1[c] + d2[c]) / df + d12[c] / dd;
    }
    m
}

/// Inverse of [`jet_to_ring_matrix`].
pub fn ring_to_jet_matrix(tri: &Triangle, slot: usize, d: usize) -> DMatrix<f64> {
    let (f1, f2) = edge_vectors(tri, slot);
    let df = d as f64;
    let dd = (d * (d - 1)) as f64;
    // directional data [s, D1, D2, D11, D22, D12] from the ring
    #[rustfmt::skip]
    let k = DMatrix::from_row_slice(6, 6, &[
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        -df, df, 0.0, 0.0, 0.0, 0.0,
        -df, 0.0, df, 0.0, 0.0, 0.0,
        dd, -2.0 * dd, 0.0, dd, 0.0, 0.0,
        dd, 0.0, -2.0 * dd, 0.0, dd, 0.0,
        dd, -dd, -dd, 0.0, 0.0, dd,
    ]);
    // E = [f1 f2]; gradient g = E^{-T} (D1, D2); Hessian H = E^{-T} D E^{-1}
    let e = Matrix2::new(f1.x, f2.x, f1.y, f2.y);
    let g = e.transpose().try_inverse().expect("degenerate triangle");
    // H_ab = Σ_{ij} G_ai D_ij G_bj with D symmetric [[D11, D12], [D12, D22]]
    let h_entry = |a: usize, b: usize| -> [f64; 3] {
        // coefficients of (D11, D22, D12)
        [
            g[(a, 0)] * g[(b, 0)],
            g[(a, 1)] * g[(b, 1)],
            g[(a, 0)] * g[(b, 1)] + g[(a, 1)] * g[(b, 0)],
        ]
    };
    let mut t = DMatrix::zeros(6, 6);
    t[(0, 0)] = 1.0;
    for a in 0..2 {
        t[(1 + a, 1)] = g[(a, 0)];
        t[(1 + a, 2)] = g[(a, 1)];
    }
    for (row, (a, b)) in [(3, (0, 0)), (4, (0, 1)), (5, (1, 1))] {
        let h = h_entry(a, b);
        t[(row, 3)] = h[0];
        t[(row, 4)] = h[1];
        t[(row, 5)] = h[2];
    }
    t * k
}

/// Solves the lower-triangular system linking the degree-6 ring of `a = p q` at the
/// interior vertex of a pie chord triangle to the degree-4 ring of `p`.
///
/// Both rings are in lexicographic order `(400, 310, 301, 220, 211, 202)` and
/// `(600, 510, 501, 420, 411, 402)`. `q` must be normalized so that `q(v1) = 1` and vanish
/// at `v2` and `v3`.
pub fn quartic_ring_from_product(a: [f64; 6], q110: f64, q101: f64, q011: f64) -> [f64; 6] {
    // rows of the product formula restricted to the ring:
    //   a510 = q110/3 c400 + 2/3 c310
    //   a420 = 8/15 q110 c310 + 2/5 c220
    //   a411 = q011/15 c400 + 4/15 (q101 c310 + q110 c301) + 2/5 c211
    let c400 = a[0];
    let c310 = (a[1] - q110 / 3.0 * c400) * 1.5;
    let c301 = (a[2] - q101 / 3.0 * c400) * 1.5;
    let c220 = (a[3] - 8.0 / 15.0 * q110 * c310) * 2.5;
    let c211 = (a[4] - q011 / 15.0 * c400 - 4.0 / 15.0 * (q101 * c310 + q110 * c301)) * 2.5;
    let c202 = (a[5] - 8.0 / 15.0 * q101 * c301) * 2.5;
    [c400, c310, c301, c220, c211, c202]
}

/// The matrix of [`quartic_ring_from_product`], as a map from the `a` ring to the `c` ring.
pub fn quartic_ring_matrix(q110: f64, q101: f64, q011: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, 6);
    for c in 0..6 {
        let mut e = [0.0; 6];
        e[c] = 1.0;
        let col = quartic_ring_from_product(e, q110, q101, q011);
        for r in 0..6 {
            m[(r, c)] = col[r];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::{bb_product, d2_ring, dim, index, BBPoly};
    use proptest::prelude::*;

    fn tri() -> Triangle {
        Triangle::new(Vec2::new(0.2, -0.1), Vec2::new(1.1, 0.3), Vec2::new(0.1, 0.9))
    }

    #[test]
    fn ring_and_jet_are_inverse() {
        for d in [4usize, 5, 6] {
            for slot in 0..3 {
                let a = jet_to_ring_matrix(&tri(), slot, d);
                let b = ring_to_jet_matrix(&tri(), slot, d);
                let id = &a * &b;
                assert!((id - DMatrix::identity(6, 6)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ring_reproduces_jet_of_polynomial() {
        let mut seed = 17u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let t = tri();
        for d in [5usize, 6] {
            let c: Vec<f64> = (0..dim(d)).map(|_| rnd()).collect();
            let p = BBPoly::new(t, d, c.clone()).unwrap();
            for slot in 0..3 {
                let mut b = [0.0; 3];
                b[slot] = 1.0;
                let jet = jet_to_vec(&p.jet_at(b));
                let ring: Vec<f64> = d2_ring(d, slot).iter().map(|x| c[x.position()]).collect();
                let got = ring_to_jet_matrix(&t, slot, d) * nalgebra::DVector::from_vec(ring);
                for i in 0..6 {
                    assert!((got[i] - jet[i]).abs() < 1e-10 * jet.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn quartic_ring_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let c = quartic_ring_from_product(a, 0.0, 0.0, 0.0);
        assert_eq!(c[0], 1.0);
        assert!((c[1] - 1.5 * 2.0).abs() < 1e-15);
        assert!((c[3] - 2.5 * 4.0).abs() < 1e-15);
        assert!((c[4] - 2.5 * 5.0).abs() < 1e-15);
        assert_eq!(quartic_ring_from_product([0.0; 6], 0.3, -1.2, 2.0), [0.0; 6]);
    }

    fn lex_ring(d: usize) -> [usize; 6] {
        [
            index(d, [d, 0, 0]),
            index(d, [d - 1, 1, 0]),
            index(d, [d - 1, 0, 1]),
            index(d, [d - 2, 2, 0]),
            index(d, [d - 2, 1, 1]),
            index(d, [d - 2, 0, 2]),
        ]
    }

    proptest! {
        // Product round trip: multiply a random quartic by an admissible conic, read the
        // degree-6 ring and recover the quartic's ring.
        #[test]
        fn quartic_ring_round_trip(
            p in prop::collection::vec(-1.0f64..1.0, 15),
            q in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let t = tri();
            let qc = vec![1.0, q[0], q[1], 0.0, q[2], 0.0];
            let pp = BBPoly::new(t, 4, p.clone()).unwrap();
            let qq = BBPoly::new(t, 2, qc).unwrap();
            let a = bb_product(&pp, &qq).unwrap();
            let r6 = lex_ring(6).map(|i| a.coeffs[i]);
            let c = quartic_ring_from_product(r6, q[0], q[1], q[2]);
            let want = lex_ring(4).map(|i| p[i]);
            for i in 0..6 {
                prop_assert!((c[i] - want[i]).abs() <= 1e-12);
            }
        }
    }
}
