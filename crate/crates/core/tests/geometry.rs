use nalgebra::{Point3, Vector4};
use proptest::prelude::*;

use splinemoco::geometry::{circular_trajectory, perturb_trajectory, rigid_matrix, RigidParams, ScanGeometry};
use splinemoco::motion::MotionCurve;

fn params() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-10.0..10.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Projecting x through a moved view equals projecting T x through the
    /// ideal view.
    #[test]
    fn motion_acts_on_object_coordinates(p in params(), x in prop::array::uniform3(-60.0..60.0f64), view in 0usize..12) {
        let geom = ScanGeometry::desk_scale(12);
        let traj = circular_trajectory(&geom).unwrap();
        let rp = RigidParams::from_array(p);
        let mut curve = MotionCurve::zeros(12);
        curve.set_params(view, rp);
        let moved = perturb_trajectory(&traj, &curve).unwrap();
        let t = rigid_matrix(&rp) * Vector4::new(x[0], x[1], x[2], 1.0);
        let a = moved.matrices[view].project(&Point3::from(x)).unwrap();
        let b = traj.matrices[view].project(&Point3::new(t.x, t.y, t.z)).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }

    /// Perturbing twice composes the rigid transforms in application order.
    #[test]
    fn perturbations_compose(p in params(), q in params()) {
        let geom = ScanGeometry::desk_scale(4);
        let traj = circular_trajectory(&geom).unwrap();
        let curve = |v: [f64; 6]| {
            let mut c = MotionCurve::zeros(4);
            for i in 0..4 {
                c.set_params(i, RigidParams::from_array(v));
            }
            c
        };
        let twice = perturb_trajectory(&perturb_trajectory(&traj, &curve(p)).unwrap(), &curve(q)).unwrap();
        let composed = traj.compose_constant(&(rigid_matrix(&RigidParams::from_array(p)) * rigid_matrix(&RigidParams::from_array(q))));
        for (a, b) in twice.matrices.iter().zip(&composed.matrices) {
            prop_assert!((a.0 - b.0).abs().max() < 1e-9 * a.0.abs().max());
        }
    }

    /// Rigid transforms preserve distances.
    #[test]
    fn rigid_matrix_is_an_isometry(p in params(), x in prop::array::uniform3(-50.0..50.0f64), y in prop::array::uniform3(-50.0..50.0f64)) {
        let m = rigid_matrix(&RigidParams::from_array(p));
        let tx = m * Vector4::new(x[0], x[1], x[2], 1.0);
        let ty = m * Vector4::new(y[0], y[1], y[2], 1.0);
        let d0 = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        let d1 = (tx - ty).norm();
        prop_assert!((d0 - d1).abs() < 1e-9);
    }
}
