use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ProjectionMatrix, ScanGeometry, Trajectory};

use super::volume::trilinear;
use super::{Sinogram, Volume};

/// Ray-march line integrals through `vol` for every detector pixel of every
/// view. Samples are taken every half of the smallest voxel spacing with
/// trilinear interpolation; rays that miss the grid integrate to zero.
pub fn forward_project(vol: &Volume, traj: &Trajectory, geom: &ScanGeometry) -> Result<Sinogram> {
    geom.validate()?;
    if traj.len() != geom.n_projections {
        return Err(Error::LengthMismatch {
            expected: geom.n_projections,
            actual: traj.len(),
        });
    }
    vol.grid.validate()?;
    let mut sino = Sinogram::zeros(geom);
    let view_len = sino.view_len();
    sino.data
        .par_chunks_mut(view_len)
        .zip(traj.matrices.par_iter())
        .enumerate()
        .try_for_each(|(i, (out, m))| project_view(vol, m, geom, out).map_err(|_| Error::DegenerateMatrix(i)))?;
    Ok(sino)
}

fn project_view(vol: &Volume, m: &ProjectionMatrix, geom: &ScanGeometry, out: &mut [f32]) -> Result<(), ()> {
    let inv = m.left_block().try_inverse().ok_or(())?;
    let source = m.camera_center().ok_or(())?;
    let g = &vol.grid;
    let step = g.spacing.iter().cloned().fold(f64::INFINITY, f64::min) * 0.5;
    // Trilinear support extends one voxel beyond the outer centers.
    let lo: [f64; 3] = std::array::from_fn(|a| g.origin[a] - g.spacing[a]);
    let hi: [f64; 3] = std::array::from_fn(|a| g.origin[a] + g.shape[a] as f64 * g.spacing[a]);
    let src = [source.x, source.y, source.z];

    for row in 0..geom.detector_rows {
        for col in 0..geom.detector_cols {
            let d = inv * nalgebra::Vector3::new(col as f64, row as f64, 1.0);
            let d = d.normalize();
            let dir = [d.x, d.y, d.z];
            let (mut t0, mut t1) = (0.0_f64, f64::INFINITY);
            let mut hit = true;
            for a in 0..3 {
                if dir[a].abs() < 1e-15 {
                    if src[a] <= lo[a] || src[a] >= hi[a] {
                        hit = false;
                        break;
                    }
                } else {
                    let ta = (lo[a] - src[a]) / dir[a];
                    let tb = (hi[a] - src[a]) / dir[a];
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
            }
            if !hit || t1 <= t0 {
                out[row * geom.detector_cols + col] = 0.0;
                continue;
            }
            let n_steps = ((t1 - t0) / step).ceil() as usize;
            let start = t0 + 0.5 * step;
            let f0: [f64; 3] = std::array::from_fn(|a| (src[a] + start * dir[a] - g.origin[a]) / g.spacing[a]);
            let df: [f64; 3] = std::array::from_fn(|a| step * dir[a] / g.spacing[a]);
            let mut acc = 0.0_f64;
            for k in 0..n_steps {
                let kf = k as f64;
                acc += trilinear(&vol.data, g.shape, f0[0] + kf * df[0], f0[1] + kf * df[1], f0[2] + kf * df[2]) as f64;
            }
            out[row * geom.detector_cols + col] = (acc * step) as f32;
        }
    }
    Ok(())
}
