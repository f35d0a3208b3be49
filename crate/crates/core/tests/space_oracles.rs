mod common;

use c1quintic::space::SplineSpace;
use common::*;

#[test]
fn dimension_matches_rank_oracle() {
    for (name, level) in [("disk", 1), ("ellipse", 1), ("c2-domain", 1)] {
        let mesh = mesh_at_level(name, level);
        let (oracle, gap) = rank_oracle(&mesh);
        // a clean cut in the spectrum, not a threshold artefact
        assert!(gap > 1e8, "{name} level {level}: spectral gap {gap:e}");
        let space = SplineSpace::new(mesh).unwrap();
        assert_eq!(space.dim(), oracle, "{name} level {level}");
    }
}
