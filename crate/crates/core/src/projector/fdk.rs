use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{ProjectionMatrix, ScanGeometry, Trajectory};

use super::{Grid, Sinogram, Volume};

/// How each view's contribution is weighted during voxel-driven
/// backprojection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackprojectionWeight {
    /// FDK: `(SID / depth)^2`, scaled by half the angular step.
    Fdk,
    /// Matched to [`forward_project`](super::forward_project): each view adds
    /// `voxel_volume * SDD^2 / (pixel_area * depth^2 * cos(gamma))`, the
    /// density of detector rays passing through the voxel. The result
    /// approximates the transpose of the ray-marching projector.
    Adjoint,
}

/// Cosine pre-weighting followed by row-wise Ram-Lak filtering.
///
/// Rows are zero-padded to the next power of two of at least twice the row
/// length. The kernel uses the detector spacing scaled to the isocenter.
pub fn weight_and_filter(sino: &Sinogram, geom: &ScanGeometry) -> Result<Sinogram> {
    sino.check_geometry(geom)?;
    let cols = geom.detector_cols;
    let padded = (2 * cols).next_power_of_two();
    let tau = geom.pixel_spacing_u / geom.magnification();
    let kernel = ramp_kernel_spectrum(padded, tau);
    let cosine = cosine_weights(geom);

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(padded);
    let inv = planner.plan_fft_inverse(padded);
    let norm = tau / padded as f64;

    let mut out = sino.clone();
    out.data.par_chunks_mut(cols).enumerate().for_each_init(
        || vec![Complex::new(0.0, 0.0); padded],
        |buf, (row_idx, row)| {
            let r = row_idx % geom.detector_rows;
            let w = &cosine[r * cols..(r + 1) * cols];
            for (k, b) in buf.iter_mut().enumerate() {
                *b = if k < cols {
                    Complex::new(row[k] as f64 * w[k], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            fwd.process(buf);
            for (b, h) in buf.iter_mut().zip(&kernel) {
                *b *= h;
            }
            inv.process(buf);
            for (k, v) in row.iter_mut().enumerate() {
                *v = (buf[k].re * norm) as f32;
            }
        },
    );
    Ok(out)
}

/// `SDD / sqrt(SDD^2 + u^2 + v^2)` for every detector pixel, with `u`, `v`
/// in mm from the principal point.
fn cosine_weights(geom: &ScanGeometry) -> Vec<f64> {
    let (cu, cv) = geom.principal_point();
    let sdd = geom.source_detector_dist;
    let mut w = Vec::with_capacity(geom.detector_rows * geom.detector_cols);
    for r in 0..geom.detector_rows {
        let v = (r as f64 - cv) * geom.pixel_spacing_v;
        for c in 0..geom.detector_cols {
            let u = (c as f64 - cu) * geom.pixel_spacing_u;
            w.push(sdd / (sdd * sdd + u * u + v * v).sqrt());
        }
    }
    w
}

/// DFT of the band-limited spatial ramp kernel `h(0) = 1/(4 tau^2)`,
/// `h(n odd) = -1/(pi n tau)^2`, `h(n even) = 0`, laid out circularly.
fn ramp_kernel_spectrum(len: usize, tau: f64) -> Vec<f64> {
    let mut h = vec![Complex::new(0.0, 0.0); len];
    for (k, slot) in h.iter_mut().enumerate() {
        let n = if k <= len / 2 { k as i64 } else { k as i64 - len as i64 };
        let v = if n == 0 {
            1.0 / (4.0 * tau * tau)
        } else if n % 2 != 0 {
            -1.0 / (PI * n as f64 * tau).powi(2)
        } else {
            0.0
        };
        *slot = Complex::new(v, 0.0);
    }
    FftPlanner::<f64>::new().plan_fft_forward(len).process(&mut h);
    h.iter().map(|c| c.re).collect()
}

/// Per-view constants for the voxel-driven kernel.
#[derive(Clone, Copy)]
pub(crate) struct ViewKernel {
    m: [[f64; 4]; 3],
    weight: BackprojectionWeight,
    scale: f64,
    sid2: f64,
    cu: f64,
    cv: f64,
    du_sdd: f64,
    dv_sdd: f64,
    cols: usize,
    rows: usize,
}

impl ViewKernel {
    pub(crate) fn new(m: &ProjectionMatrix, geom: &ScanGeometry, grid: &Grid, weight: BackprojectionWeight) -> Self {
        let (cu, cv) = geom.principal_point();
        let scale = match weight {
            BackprojectionWeight::Fdk => 0.5 * geom.angular_step(),
            BackprojectionWeight::Adjoint => {
                grid.voxel_volume() * geom.source_detector_dist.powi(2) / (geom.pixel_spacing_u * geom.pixel_spacing_v)
            }
        };
        Self {
            m: std::array::from_fn(|r| std::array::from_fn(|c| m.0[(r, c)])),
            weight,
            scale,
            sid2: geom.source_isocenter_dist.powi(2),
            cu,
            cv,
            du_sdd: geom.pixel_spacing_u / geom.source_detector_dist,
            dv_sdd: geom.pixel_spacing_v / geom.source_detector_dist,
            cols: geom.detector_cols,
            rows: geom.detector_rows,
        }
    }

    /// The same kernel with its contribution subtracted instead of added.
    pub(crate) fn negated(mut self) -> Self {
        self.scale = -self.scale;
        self
    }

    /// Adds this view's contribution to one z-slice `out` (length nx*ny).
    pub(crate) fn accumulate_slice(&self, view: &[f32], grid: &Grid, z: usize, out: &mut [f32]) {
        match self.weight {
            BackprojectionWeight::Fdk => self.accumulate::<false>(view, grid, z, out),
            BackprojectionWeight::Adjoint => self.accumulate::<true>(view, grid, z, out),
        }
    }

    #[inline(always)]
    fn accumulate<const ADJOINT: bool>(&self, view: &[f32], grid: &Grid, z: usize, out: &mut [f32]) {
        let [nx, ny, _] = grid.shape;
        let cols = self.cols;
        assert!(out.len() >= nx * ny);
        assert!(cols >= 2 && self.rows >= 2 && view.len() == self.rows * cols);
        let m = &self.m;
        let pz = grid.origin[2] + z as f64 * grid.spacing[2];
        let sx = grid.spacing[0];
        let (da, db, dc) = (m[0][0] * sx, m[1][0] * sx, m[2][0] * sx);
        let umax = (cols - 1) as f64;
        let vmax = (self.rows - 1) as f64;
        let (u_last, v_last) = (cols - 2, self.rows - 2);
        for y in 0..ny {
            let py = grid.origin[1] + y as f64 * grid.spacing[1];
            let px = grid.origin[0];
            let a0 = m[0][0] * px + m[0][1] * py + m[0][2] * pz + m[0][3];
            let b0 = m[1][0] * px + m[1][1] * py + m[1][2] * pz + m[1][3];
            let c0 = m[2][0] * px + m[2][1] * py + m[2][2] * pz + m[2][3];
            let row = &mut out[y * nx..(y + 1) * nx];
            for (x, slot) in row.iter_mut().enumerate() {
                let xf = x as f64;
                let c = c0 + xf * dc;
                if c <= 0.0 {
                    continue;
                }
                let inv = 1.0 / c;
                let u = (a0 + xf * da) * inv;
                let v = (b0 + xf * db) * inv;
                if !(u >= 0.0 && v >= 0.0 && u <= umax && v <= vmax) {
                    continue;
                }
                // Clamping the base index keeps all four taps in bounds; on the
                // last column or row the fractional weight becomes 1.
                let iu = (u as usize).min(u_last);
                let iv = (v as usize).min(v_last);
                let fu = (u - iu as f64) as f32;
                let fv = (v - iv as f64) as f32;
                let i = iv * cols + iu;
                // SAFETY: iu + 1 < cols, iv + 1 < rows and view holds rows * cols samples.
                let (p00, p10, p01, p11) = unsafe {
                    (
                        *view.get_unchecked(i),
                        *view.get_unchecked(i + 1),
                        *view.get_unchecked(i + cols),
                        *view.get_unchecked(i + cols + 1),
                    )
                };
                let top = p00 + (p10 - p00) * fu;
                let bottom = p01 + (p11 - p01) * fu;
                let sample = top + (bottom - top) * fv;
                let w = if ADJOINT {
                    let du = (u - self.cu) * self.du_sdd;
                    let dv = (v - self.cv) * self.dv_sdd;
                    inv * inv * (1.0 + du * du + dv * dv).sqrt()
                } else {
                    self.sid2 * inv * inv
                };
                *slot += (self.scale * w) as f32 * sample;
            }
        }
    }
}

fn check_inputs(sino: &Sinogram, traj: &Trajectory, geom: &ScanGeometry, grid: &Grid) -> Result<()> {
    geom.validate()?;
    sino.check_geometry(geom)?;
    if traj.len() != sino.n_projections {
        return Err(Error::LengthMismatch {
            expected: sino.n_projections,
            actual: traj.len(),
        });
    }
    grid.validate()
}

/// Voxel-driven backprojection of (already filtered) projections through
/// arbitrary projection matrices onto a grid centered at the isocenter.
pub fn backproject(
    filtered: &Sinogram,
    traj: &Trajectory,
    geom: &ScanGeometry,
    out_shape: [usize; 3],
    out_spacing: [f64; 3],
) -> Result<Volume> {
    backproject_onto(filtered, traj, geom, Grid::centered(out_shape, out_spacing), BackprojectionWeight::Fdk)
}

/// [`backproject`] onto an explicit grid with a chosen weighting.
pub fn backproject_onto(
    sino: &Sinogram,
    traj: &Trajectory,
    geom: &ScanGeometry,
    grid: Grid,
    weight: BackprojectionWeight,
) -> Result<Volume> {
    check_inputs(sino, traj, geom, &grid)?;
    let kernels: Vec<ViewKernel> = traj
        .matrices
        .iter()
        .map(|m| ViewKernel::new(m, geom, &grid, weight))
        .collect();
    let mut vol = Volume::zeros(grid);
    let slice = grid.shape[0] * grid.shape[1];
    vol.data.par_chunks_mut(slice).enumerate().for_each(|(z, out)| {
        for (i, k) in kernels.iter().enumerate() {
            k.accumulate_slice(sino.view(i), &grid, z, out);
        }
    });
    Ok(vol)
}

/// FDK reconstruction: [`weight_and_filter`] then [`backproject`].
pub fn fdk_reconstruct(
    sino: &Sinogram,
    traj: &Trajectory,
    geom: &ScanGeometry,
    out_shape: [usize; 3],
    out_spacing: [f64; 3],
) -> Result<Volume> {
    if traj.len() != sino.n_projections {
        return Err(Error::LengthMismatch {
            expected: sino.n_projections,
            actual: traj.len(),
        });
    }
    let filtered = weight_and_filter(sino, geom)?;
    backproject(&filtered, traj, geom, out_shape, out_spacing)
}
