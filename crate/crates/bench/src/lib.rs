//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use c1quintic::mesh::{refine_uniform, CurvedTriangulation};
use c1quintic::problems::builtin_mesh;
use c1quintic::space::SplineSpace;

/// Built-in mesh `name` refined `level − 1` times.
pub fn mesh(name: &str, level: usize) -> CurvedTriangulation {
    let mut m = builtin_mesh(name).expect("built-in mesh");
    for _ in 1..level {
        m = refine_uniform(&m).expect("refinement");
    }
    m
}

pub fn space(name: &str, level: usize) -> Arc<SplineSpace> {
    Arc::new(SplineSpace::new(mesh(name, level)).expect("spline space"))
}
