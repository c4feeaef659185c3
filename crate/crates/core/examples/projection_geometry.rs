//! Builds the desk-scale circular trajectory, projects a few world points and
//! shows how a rigid pose change moves their detector positions.

use nalgebra::Point3;
use splinemoco::geometry::{circular_trajectory, perturb_trajectory, RigidParams, ScanGeometry};
use splinemoco::motion::MotionCurve;

fn main() -> splinemoco::Result<()> {
    let geom = ScanGeometry::desk_scale(8);
    let traj = circular_trajectory(&geom)?;
    println!(
        "{} views over {:.0} deg, magnification {:.3}, principal point {:?}",
        traj.len(),
        geom.angular_range.to_degrees(),
        geom.magnification(),
        geom.principal_point()
    );

    let mut curve = MotionCurve::zeros(geom.n_projections);
    for i in 0..geom.n_projections {
        curve.set_params(
            i,
            RigidParams {
                t_x: 2.0,
                r_z: 1.0,
                ..Default::default()
            },
        );
    }
    let moved = perturb_trajectory(&traj, &curve)?;

    let points = [[0.0, 0.0, 0.0], [40.0, 0.0, 0.0], [0.0, 30.0, 20.0]];
    for (i, (ideal, shifted)) in traj.matrices.iter().zip(&moved.matrices).enumerate().take(3) {
        let src = ideal.camera_center().expect("finite source");
        println!("view {i}: source at ({:.1}, {:.1}, {:.1}) mm", src.x, src.y, src.z);
        for p in points {
            let q = Point3::from(p);
            let (u, v) = ideal.project(&q).expect("in front of the source");
            let (um, vm) = shifted.project(&q).expect("in front of the source");
            println!("  {p:?} -> ({u:7.2}, {v:7.2}) px, moved ({um:7.2}, {vm:7.2}) px");
        }
    }
    Ok(())
}
