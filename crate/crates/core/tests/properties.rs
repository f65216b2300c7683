//! Property tests of the geometric and Green-function invariants.

use proptest::prelude::*;
use std::rc::Rc;
use todalab_core::{Domain, GreenEvaluator, Mesh, SizeField, Vec2};

fn disk_point() -> impl Strategy<Value = Vec2> {
    // Polar sampling keeps points strictly inside the unit disk.
    (0.0..0.93f64, 0.0..std::f64::consts::TAU).prop_map(|(r, th)| {
        Vec2::new(r * th.cos(), r * th.sin())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The Dirichlet Green function of the disk is symmetric, and the
    /// vortex weight equals e^{-4π G} with the logarithmic pole restored.
    #[test]
    fn green_symmetry_and_weight_identity(x in disk_point(), y in disk_point()) {
        prop_assume!(x.dist(y) > 1e-3);
        let green = GreenEvaluator::analytic_disk();
        let gxy = green.value(x, y).unwrap();
        let gyx = green.value(y, x).unwrap();
        prop_assert!((gxy - gyx).abs() < 1e-12, "G(x,y) = {gxy}, G(y,x) = {gyx}");
        let h = green.vortex_weight(x, &[y]).unwrap();
        let direct = (-4.0 * std::f64::consts::PI * gxy).exp() ;
        let rel = (h - direct).abs() / direct.max(1e-300);
        prop_assert!(rel < 1e-10, "weight {h} vs e^(-4πG) {direct}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Point location reconstructs the query from barycentric coordinates,
    /// and nodal interpolation reproduces linear fields exactly.
    #[test]
    fn locate_is_consistent_and_p1_reproduces_linears(
        p in disk_point(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        c in -2.0..2.0f64,
    ) {
        let mesh = Rc::new(
            Mesh::build(&Domain::UnitDisk, &SizeField::uniform(0.25)).unwrap(),
        );
        let loc = match mesh.locate(p) {
            Ok(hit) => hit,
            // Chord gaps near the rim are genuine exterior points.
            Err(_) => return Ok(()),
        };
        let tri = mesh.tris[loc.tri];
        let rebuilt = mesh.nodes[tri[0]] * loc.bary[0]
            + mesh.nodes[tri[1]] * loc.bary[1]
            + mesh.nodes[tri[2]] * loc.bary[2];
        prop_assert!(rebuilt.dist(p) < 1e-9, "reconstruction drifted by {}", rebuilt.dist(p));
        let linear: Vec<f64> = mesh.nodes.iter().map(|q| a + b * q.x + c * q.y).collect();
        let interp = mesh.interp(loc, &linear);
        let exact = a + b * p.x + c * p.y;
        prop_assert!((interp - exact).abs() < 1e-10, "interp {interp} vs exact {exact}");
    }
}
