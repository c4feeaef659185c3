//! Reprojection error between a true and an estimated trajectory, raw and
//! with the unobservable global rigid offset removed.

use splinemoco::geometry::{circular_trajectory, perturb_trajectory, RigidParams, ScanGeometry};
use splinemoco::metrics::{rpe, MarkerSet};
use splinemoco::motion::{sample_motion_curve, CutoffFrequency, MotionCurve};

fn main() -> splinemoco::Result<()> {
    let geom = ScanGeometry::desk_scale(120);
    let ideal = circular_trajectory(&geom)?;
    let markers = MarkerSet::default();

    let curve = sample_motion_curve(3, &geom, CutoffFrequency::new(0.01)?, 5.0, 5.0)?;
    let truth = perturb_trajectory(&ideal, &curve)?;
    let raw = rpe(&truth, &ideal, &markers, &geom, false)?;
    let aligned = rpe(&truth, &ideal, &markers, &geom, true)?;
    println!("ideal vs moved: raw {:.3} mm, gauge-aligned {:.3} mm", raw.mean_mm, aligned.mean_mm);
    println!("  best global offset {:?}", aligned.gauge);

    // A constant pose offset is invisible after alignment.
    let mut offset = MotionCurve::zeros(geom.n_projections);
    for i in 0..geom.n_projections {
        offset.set_params(i, RigidParams::from_array([3.0, -1.0, 2.0, 1.0, 0.5, -2.0]));
    }
    let shifted = perturb_trajectory(&ideal, &offset)?;
    println!(
        "constant offset: raw {:.3} mm, gauge-aligned {:.2e} mm",
        rpe(&ideal, &shifted, &markers, &geom, false)?.mean_mm,
        rpe(&ideal, &shifted, &markers, &geom, true)?.mean_mm
    );
    Ok(())
}
