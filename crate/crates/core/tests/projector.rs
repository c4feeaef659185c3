use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splinemoco::geometry::{circular_trajectory, perturb_trajectory, RigidParams, ScanGeometry};
use splinemoco::motion::MotionCurve;
use splinemoco::projector::{
    backproject_onto, fdk_reconstruct, forward_project, render_phantom, BackprojectionWeight, Grid, PhantomSpec,
    Sinogram, Volume,
};

fn small_geom(n: usize) -> ScanGeometry {
    ScanGeometry {
        n_projections: n,
        detector_rows: 32,
        detector_cols: 40,
        pixel_spacing_u: 4.0,
        pixel_spacing_v: 4.0,
        ..ScanGeometry::default()
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

/// <A x, y> against <x, A^T y> with the adjoint-weighted backprojector.
pub fn adjoint_mismatch(seed: u64) -> f64 {
    let geom = small_geom(12);
    let traj = circular_trajectory(&geom).unwrap();
    let grid = Grid::cubic(16, 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Volume::from_data(grid, (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let mut y = Sinogram::zeros(&geom);
    y.data.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
    let ax = forward_project(&x, &traj, &geom).unwrap();
    let aty = backproject_onto(&y, &traj, &geom, grid, BackprojectionWeight::Adjoint).unwrap();
    let lhs = dot(&ax.data, &y.data);
    let rhs = dot(&x.data, &aty.data);
    (lhs - rhs).abs() / lhs.abs()
}

#[test]
fn backprojector_is_adjoint_of_projector() {
    for seed in 0..10 {
        let m = adjoint_mismatch(seed);
        assert!(m < 0.03, "seed {seed}: relative mismatch {m}");
    }
}

#[test]
fn moving_the_object_equals_moving_the_trajectory() {
    let geom = small_geom(6);
    let traj = circular_trajectory(&geom).unwrap();
    // whole-voxel shift, so both volumes sample the phantom at the same points
    let t = [6.0, -3.0, 3.0];
    let spec = PhantomSpec::head();
    let mut shifted = spec.clone();
    for e in &mut shifted.ellipsoids {
        for a in 0..3 {
            e.center[a] += t[a];
        }
    }
    let vol = render_phantom(&spec, [64; 3], [3.0; 3]).unwrap();
    let vol_shifted = render_phantom(&shifted, [64; 3], [3.0; 3]).unwrap();
    let mut curve = MotionCurve::zeros(6);
    for i in 0..6 {
        curve.set_params(
            i,
            RigidParams {
                t_x: t[0],
                t_y: t[1],
                t_z: t[2],
                ..Default::default()
            },
        );
    }
    let a = forward_project(&vol_shifted, &traj, &geom).unwrap();
    let b = forward_project(&vol, &perturb_trajectory(&traj, &curve).unwrap(), &geom).unwrap();
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>() / a.data.len() as f64;
    let rel = mse.sqrt() / a.max() as f64;
    assert!(rel < 0.02, "relative RMSE {rel}");
}

#[test]
fn projection_and_reconstruction_are_linear() {
    let geom = small_geom(8);
    let traj = circular_trajectory(&geom).unwrap();
    let a = render_phantom(&PhantomSpec::head(), [24; 3], [6.0; 3]).unwrap();
    let b = render_phantom(&PhantomSpec::head_variant(4), [24; 3], [6.0; 3]).unwrap();
    let sum = Volume::from_data(a.grid, a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect()).unwrap();
    let (pa, pb, ps) = (
        forward_project(&a, &traj, &geom).unwrap(),
        forward_project(&b, &traj, &geom).unwrap(),
        forward_project(&sum, &traj, &geom).unwrap(),
    );
    let scale = ps.max();
    for i in 0..ps.data.len() {
        assert!((pa.data[i] + pb.data[i] - ps.data[i]).abs() <= 1e-5 * scale);
    }
    let ra = fdk_reconstruct(&pa, &traj, &geom, [16; 3], [8.0; 3]).unwrap();
    let rb = fdk_reconstruct(&pb, &traj, &geom, [16; 3], [8.0; 3]).unwrap();
    let rs = fdk_reconstruct(&ps, &traj, &geom, [16; 3], [8.0; 3]).unwrap();
    let (lo, hi) = rs.min_max();
    for i in 0..rs.data.len() {
        assert!((ra.data[i] + rb.data[i] - rs.data[i]).abs() <= 1e-5 * (hi - lo));
    }
}

#[test]
fn volumes_and_sinograms_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let geom = small_geom(3);
    let traj = circular_trajectory(&geom).unwrap();
    let vol = render_phantom(&PhantomSpec::head(), [20; 3], [7.0; 3]).unwrap();
    let sino = forward_project(&vol, &traj, &geom).unwrap();
    vol.save(&dir.path().join("v")).unwrap();
    sino.save(&dir.path().join("s"), &geom).unwrap();
    assert_eq!(Volume::load(&dir.path().join("v")).unwrap(), vol);
    let (s2, g2) = Sinogram::load(&dir.path().join("s")).unwrap();
    assert_eq!(s2, sino);
    assert_eq!(g2, geom);
}
