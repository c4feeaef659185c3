//! Reprojection error, volumetric SSIM and after/before run records.

mod rpe;
mod ssim;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use rpe::{rpe, RpeResult};
pub use ssim::{gaussian_window, ssim3d, ssim3d_with_range};

use crate::error::{Error, Result};
use crate::geometry::{ScanGeometry, Trajectory};
use crate::projector::Volume;

/// Seed of the default marker set.
pub const MARKER_SEED: u64 = 0x5EED_0100;
pub const MARKER_COUNT: usize = 100;
pub const MARKER_RADIUS_MM: f64 = 50.0;
/// Gauge-aligned RPE below this (mm) means the motion was a pure global
/// offset; the after/before ratio is then undefined and reported as NaN.
pub const RPE_FLOOR_MM: f64 = 1e-6;

/// World points (mm) whose projections define the reprojection error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    #[serde(rename = "points_mm")]
    pub points: Vec<[f64; 3]>,
}

impl Default for MarkerSet {
    /// 100 points uniform in a 50 mm ball around the isocenter.
    fn default() -> Self {
        Self::uniform_ball(MARKER_SEED, MARKER_COUNT, MARKER_RADIUS_MM)
    }
}

impl MarkerSet {
    pub fn uniform_ball(seed: u64, count: usize, radius: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        while points.len() < count {
            let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                points.push(p.map(|v| v * radius));
            }
        }
        Self { points }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("marker set is empty".into()));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("marker set contains non-finite points".into()));
        }
        Ok(())
    }
}

/// Identifies one cell of the experiment grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunId {
    pub scan_seed: u64,
    pub cutoff: f64,
    pub n_nodes: usize,
}

/// Before/after metrics of one compensation run. The headline RPE values are
/// gauge-aligned; the raw ones are kept for audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scan_seed: u64,
    pub cutoff: f64,
    pub n_nodes: usize,
    pub rpe_before_mm: f64,
    pub rpe_after_mm: f64,
    pub rpe_before_raw_mm: f64,
    pub rpe_after_raw_mm: f64,
    pub ssim_before: f64,
    pub ssim_after: f64,
    pub rpe_ratio: f64,
    pub rpe_ratio_raw: f64,
    pub ssim_ratio: f64,
}

/// `after / before`, defined as 1 when both are zero.
pub fn ratio(after: f64, before: f64) -> f64 {
    if before == 0.0 && after == 0.0 {
        1.0
    } else {
        after / before
    }
}

/// Trajectories and volumes entering one run's evaluation.
pub struct RunInputs<'a> {
    pub gt_traj: &'a Trajectory,
    pub init_traj: &'a Trajectory,
    pub est_traj: &'a Trajectory,
    pub gt_volume: &'a Volume,
    pub vol_before: &'a Volume,
    pub vol_after: &'a Volume,
}

/// Assembles the before/after record of a run.
pub fn evaluate_run(id: RunId, inputs: &RunInputs<'_>, markers: &MarkerSet, geom: &ScanGeometry) -> Result<MetricRecord> {
    let before = rpe(inputs.gt_traj, inputs.init_traj, markers, geom, true)?;
    let after = rpe(inputs.gt_traj, inputs.est_traj, markers, geom, true)?;
    let before_raw = rpe(inputs.gt_traj, inputs.init_traj, markers, geom, false)?;
    let after_raw = rpe(inputs.gt_traj, inputs.est_traj, markers, geom, false)?;
    let (lo, hi) = inputs.gt_volume.min_max();
    let range = (hi - lo) as f64;
    let ssim_before = ssim3d_with_range(inputs.gt_volume, inputs.vol_before, range)?;
    let ssim_after = ssim3d_with_range(inputs.gt_volume, inputs.vol_after, range)?;
    Ok(MetricRecord {
        scan_seed: id.scan_seed,
        cutoff: id.cutoff,
        n_nodes: id.n_nodes,
        rpe_before_mm: before.mean_mm,
        rpe_after_mm: after.mean_mm,
        rpe_before_raw_mm: before_raw.mean_mm,
        rpe_after_raw_mm: after_raw.mean_mm,
        ssim_before,
        ssim_after,
        rpe_ratio: if before.mean_mm < RPE_FLOOR_MM {
            log::warn!(
                "run {id:?}: motion is a global offset only (aligned RPE {:.1e} mm); RPE ratio undefined",
                before.mean_mm
            );
            f64::NAN
        } else {
            ratio(after.mean_mm, before.mean_mm)
        },
        rpe_ratio_raw: ratio(after_raw.mean_mm, before_raw.mean_mm),
        ssim_ratio: ratio(ssim_after, ssim_before),
    })
}
