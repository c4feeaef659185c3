use nalgebra::{DMatrix, DVector, Point3};

use crate::error::{Error, Result};
use crate::geometry::{rigid_matrix, RigidParams, ScanGeometry, Trajectory};

use super::MarkerSet;

/// Largest constant offset the gauge search may apply.
const GAUGE_BOUND_MM: f64 = 50.0;
const GAUGE_BOUND_DEG: f64 = 30.0;

/// Reprojection error result, with the gauge transform that was applied to
/// the test trajectory (zero when alignment is off).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RpeResult {
    pub mean_mm: f64,
    pub gauge: RigidParams,
    pub excluded_pairs: usize,
}

/// Detector-plane displacement of each (view, marker) pair, in mm; pairs
/// where either projection falls behind the source are `None`.
fn displacements(
    reference: &Trajectory,
    test: &Trajectory,
    markers: &MarkerSet,
    geom: &ScanGeometry,
    gauge: Option<&RigidParams>,
) -> Vec<Option<[f64; 2]>> {
    let g = gauge.map(rigid_matrix);
    let mut out = Vec::with_capacity(reference.len() * markers.points.len());
    for (r, t) in reference.matrices.iter().zip(&test.matrices) {
        let t = match &g {
            Some(g) => t.compose(g),
            None => *t,
        };
        for p in &markers.points {
            let p = Point3::from(*p);
            out.push(match (r.project(&p), t.project(&p)) {
                (Some((ur, vr)), Some((ut, vt))) => {
                    Some([(ut - ur) * geom.pixel_spacing_u, (vt - vr) * geom.pixel_spacing_v])
                }
                _ => None,
            });
        }
    }
    out
}

fn mean_distance(d: &[Option<[f64; 2]>]) -> Option<f64> {
    let (sum, n) = d
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v[0].hypot(v[1]), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean detector-plane distance (mm) between the projections of `markers`
/// under two trajectories.
///
/// With `gauge_align`, a single constant rigid transform composed onto every
/// view of `test` is first chosen to minimize that mean, so a global pose
/// offset does not count as error.
pub fn rpe(
    reference: &Trajectory,
    test: &Trajectory,
    markers: &MarkerSet,
    geom: &ScanGeometry,
    gauge_align: bool,
) -> Result<RpeResult> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: test.len(),
        });
    }
    markers.validate()?;
    let gauge = if gauge_align {
        align_gauge(reference, test, markers, geom)
    } else {
        RigidParams::default()
    };
    let d = displacements(reference, test, markers, geom, gauge_align.then_some(&gauge));
    let excluded = d.iter().filter(|v| v.is_none()).count();
    if excluded > 0 {
        log::warn!("{excluded} marker projections fell behind the source and were excluded");
    }
    let mean_mm = mean_distance(&d).ok_or(Error::AllMarkersExcluded)?;
    Ok(RpeResult {
        mean_mm,
        gauge,
        excluded_pairs: excluded,
    })
}

fn clamp_gauge(v: [f64; 6]) -> [f64; 6] {
    std::array::from_fn(|a| {
        let b = if a < 3 { GAUGE_BOUND_MM } else { GAUGE_BOUND_DEG };
        v[a].clamp(-b, b)
    })
}

/// Levenberg-Marquardt on the stacked displacement vector, followed by
/// iteratively reweighted refinements that turn the least-squares optimum into
/// the minimizer of the mean (unsquared) distance.
fn align_gauge(reference: &Trajectory, test: &Trajectory, markers: &MarkerSet, geom: &ScanGeometry) -> RigidParams {
    let residual = |g: &[f64; 6], weights: Option<&[f64]>| -> Vec<f64> {
        let d = displacements(reference, test, markers, geom, Some(&RigidParams::from_array(*g)));
        let mut r = Vec::with_capacity(2 * d.len());
        for (i, v) in d.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            let [a, b] = v.unwrap_or([0.0, 0.0]);
            r.push(a * w);
            r.push(b * w);
        }
        r
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut g = [0.0; 6];
    let mut weights: Option<Vec<f64>> = None;
    for round in 0..6 {
        let mut r = residual(&g, weights.as_deref());
        let mut c = cost(&r);
        let mut lambda = 1e-3;
        for _ in 0..50 {
            let h = 1e-5;
            let mut jac = DMatrix::<f64>::zeros(r.len(), 6);
            for k in 0..6 {
                let mut gp = g;
                gp[k] += h;
                let mut gm = g;
                gm[k] -= h;
                let rp = residual(&gp, weights.as_deref());
                let rm = residual(&gm, weights.as_deref());
                for i in 0..r.len() {
                    jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let grad = &jt * DVector::from_column_slice(&r);
            let mut accepted = false;
            for _ in 0..10 {
                let mut a = jtj.clone();
                for k in 0..6 {
                    a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
                }
                let Some(step) = a.lu().solve(&(-&grad)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = clamp_gauge(std::array::from_fn(|k| g[k] + step[k]));
                let rt = residual(&trial, weights.as_deref());
                let ct = cost(&rt);
                if ct < c {
                    let rel = (c - ct) / c.max(1e-300);
                    g = trial;
                    r = rt;
                    c = ct;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = rel > 1e-10;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted || c < 1e-24 {
                break;
            }
        }
        if c < 1e-24 || round == 5 {
            break;
        }
        // Reweight by 1/sqrt(distance) so the squared cost approximates the
        // sum of distances around the current estimate.
        let d = displacements(reference, test, markers, geom, Some(&RigidParams::from_array(g)));
        weights = Some(
            d.iter()
                .map(|v| v.map_or(0.0, |[a, b]| 1.0 / a.hypot(b).max(1e-6).sqrt()))
                .collect(),
        );
    }

    // Keep whichever of the refined or identity transform gives the lower mean.
    let aligned = RigidParams::from_array(g);
    let m_aligned = mean_distance(&displacements(reference, test, markers, geom, Some(&aligned)));
    let m_identity = mean_distance(&displacements(reference, test, markers, geom, None));
    match (m_aligned, m_identity) {
        (Some(a), Some(i)) if a <= i => aligned,
        (Some(_), None) => aligned,
        _ => RigidParams::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circular_trajectory, perturb_trajectory};
    use crate::motion::MotionCurve;

    fn constant_curve(n: usize, p: RigidParams) -> MotionCurve {
        let mut c = MotionCurve::zeros(n);
        for i in 0..n {
            c.set_params(i, p);
        }
        c
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let geom = ScanGeometry::desk_scale(20);
        let traj = circular_trajectory(&geom).unwrap();
        let m = MarkerSet::default();
        assert_eq!(rpe(&traj, &traj, &m, &geom, false).unwrap().mean_mm, 0.0);
        assert!(rpe(&traj, &traj, &m, &geom, true).unwrap().mean_mm < 1e-9);
    }

    #[test]
    fn isocenter_translation_bounded_by_magnification() {
        let geom = ScanGeometry {
            n_projections: 4,
            ..ScanGeometry::default()
        };
        let traj = circular_trajectory(&geom).unwrap();
        let moved = perturb_trajectory(
            &traj,
            &constant_curve(
                4,
                RigidParams {
                    t_x: 1.0,
                    ..Default::default()
                },
            ),
        )
        .unwrap();
        let markers = MarkerSet {
            points: vec![[0.0; 3]],
        };
        let bound = 1200.0 / 785.0;
        for v in 0..4 {
            let one = |t: &Trajectory| Trajectory {
                matrices: vec![t.matrices[v]],
            };
            let e = rpe(&one(&traj), &one(&moved), &markers, &geom, false).unwrap().mean_mm;
            assert!(e <= bound + 1e-9, "view {v}: {e}");
            if v % 2 == 0 {
                // x is along the ray at 0 and 180 degrees
                assert!(e < 1e-9);
            } else {
                assert!((e - bound).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_perturbation_is_gauge_removable() {
        let geom = ScanGeometry::desk_scale(60);
        let traj = circular_trajectory(&geom).unwrap();
        let p = RigidParams::from_array([3.0, -2.0, 1.5, 2.0, -4.0, 3.0]);
        let moved = perturb_trajectory(&traj, &constant_curve(60, p)).unwrap();
        let m = MarkerSet::default();
        let raw = rpe(&traj, &moved, &m, &geom, false).unwrap();
        assert!(raw.mean_mm > 1.0);
        let aligned = rpe(&traj, &moved, &m, &geom, true).unwrap();
        assert!(aligned.mean_mm < 1e-3, "{aligned:?}");
    }

    #[test]
    fn raw_error_is_symmetric() {
        let geom = ScanGeometry::desk_scale(30);
        let traj = circular_trajectory(&geom).unwrap();
        let mut c = MotionCurve::zeros(30);
        for i in 0..30 {
            c.axis_mut(i % 6)[i] = 2.0;
        }
        let moved = perturb_trajectory(&traj, &c).unwrap();
        let m = MarkerSet::default();
        let ab = rpe(&traj, &moved, &m, &geom, false).unwrap().mean_mm;
        let ba = rpe(&moved, &traj, &m, &geom, false).unwrap().mean_mm;
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0);
    }

    #[test]
    fn markers_behind_source_are_excluded() {
        let geom = ScanGeometry::desk_scale(2);
        let traj = circular_trajectory(&geom).unwrap();
        let behind = MarkerSet {
            points: vec![[2000.0, 0.0, 0.0], [-2000.0, 0.0, 0.0]],
        };
        // each marker is behind the source in exactly one of the two views
        let r = rpe(&traj, &traj, &behind, &geom, false).unwrap();
        assert_eq!(r.excluded_pairs, 2);
        let one = Trajectory {
            matrices: vec![traj.matrices[0]],
        };
        let only_behind = MarkerSet {
            points: vec![[2000.0, 0.0, 0.0]],
        };
        assert!(matches!(
            rpe(&one, &one, &only_behind, &geom, false),
            Err(Error::AllMarkersExcluded)
        ));
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = circular_trajectory(&ScanGeometry::desk_scale(4)).unwrap();
        let b = circular_trajectory(&ScanGeometry::desk_scale(5)).unwrap();
        assert!(rpe(&a, &b, &MarkerSet::default(), &ScanGeometry::desk_scale(4), false).is_err());
    }
}
