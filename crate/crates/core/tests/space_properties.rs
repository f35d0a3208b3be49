mod common;

use std::sync::Arc;

use c1quintic::mesh::Simplex;
use c1quintic::space::SplineSpace;
use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn space(name: &str, level: usize) -> Arc<SplineSpace> {
    Arc::new(SplineSpace::new(mesh_at_level(name, level)).unwrap())
}

#[test]
fn random_splines_are_smooth_vanish_on_the_boundary_and_are_dual() {
    for name in ["disk", "ellipse", "c2-domain"] {
        let d = random_space_defects(&space(name, 1), 20, 17);
        assert!(d.c0 <= 1e-10 && d.c1 <= 1e-10 && d.c1_bb <= 1e-10, "{name}: {d:?}");
        assert!(d.c2 <= 1e-8, "{name}: {d:?}");
        assert!(d.boundary <= 1e-10, "{name}: {d:?}");
        assert!(d.duality <= 1e-12, "{name}: {d:?}");
    }
}

#[test]
fn refined_splines_keep_smoothness() {
    let d = random_space_defects(&space("ellipse", 2), 5, 3);
    assert!(
        d.c1.max(d.c1_bb) <= 1e-10 && d.c2 <= 1e-8 && d.boundary <= 1e-10,
        "{d:?}"
    );
    assert!(d.duality <= 1e-12, "{d:?}");
}

#[test]
fn gradients_match_finite_differences() {
    let s = space("disk", 1);
    let mut rng = StdRng::seed_from_u64(23);
    let f = random_spline(&s, &mut rng);
    let h = 1e-6;
    for _ in 0..50 {
        let r = rng.random_range(0.0f64..0.9).sqrt();
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let x = c1quintic::bernstein::Vec2::new(r * th.cos(), r * th.sin());
        let g = f.jet(x).unwrap().grad;
        let dx = c1quintic::bernstein::Vec2::new(h, 0.0);
        let dy = c1quintic::bernstein::Vec2::new(0.0, h);
        let fd = c1quintic::bernstein::Vec2::new(
            (f.eval(x + dx).unwrap() - f.eval(x - dx).unwrap()) / (2.0 * h),
            (f.eval(x + dy).unwrap() - f.eval(x - dy).unwrap()) / (2.0 * h),
        );
        assert!((g - fd).norm() <= 1e-6 * g.norm().max(1.0), "at {x:?}: {g:?} vs {fd:?}");
    }
}

#[test]
fn basis_functions_stay_in_the_third_star_of_their_triangle() {
    for (name, level) in [("disk", 1), ("disk", 2), ("ellipse", 1)] {
        let s = space(name, level);
        for (k, d) in s.mds.dofs.iter().enumerate() {
            let star = s.star(&[Simplex::Triangle(d.triangle)], 3);
            let foot = basis_footprint(&s, k, 1e-14);
            assert!(
                foot.iter().all(|t| star.contains(t)),
                "{name} L{level} dof {k}: {foot:?}"
            );
            assert!(s.basis_support(k).iter().all(|t| star.contains(t)));
        }
    }
}
