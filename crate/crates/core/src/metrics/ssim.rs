use crate::error::{Error, Result};
use crate::projector::Volume;

pub const WINDOW: usize = 7;
pub const SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;

/// Mean structural similarity over every Gaussian-weighted 7x7x7 window that
/// lies fully inside the volumes. The dynamic range is taken from `a`.
pub fn ssim3d(a: &Volume, b: &Volume) -> Result<f64> {
    let (lo, hi) = a.min_max();
    ssim3d_with_range(a, b, (hi - lo) as f64)
}

/// [`ssim3d`] with an explicit dynamic range.
pub fn ssim3d_with_range(a: &Volume, b: &Volume, range: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("ssim inputs {:?} vs {:?}", a.shape(), b.shape())));
    }
    let shape = a.shape();
    if shape.iter().any(|&n| n < WINDOW) {
        return Err(Error::ShapeMismatch(format!("ssim needs every dimension >= {WINDOW}, got {shape:?}")));
    }
    // A flat reference has no dynamic range; fall back to unit range so the
    // constants stay positive.
    let range = if range > 0.0 { range } else { 1.0 };
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);

    let n = a.data.len();
    let av: Vec<f64> = a.data.iter().map(|&v| v as f64).collect();
    let bv: Vec<f64> = b.data.iter().map(|&v| v as f64).collect();
    let mut aa = Vec::with_capacity(n);
    let mut bb = Vec::with_capacity(n);
    let mut ab = Vec::with_capacity(n);
    for i in 0..n {
        aa.push(av[i] * av[i]);
        bb.push(bv[i] * bv[i]);
        ab.push(av[i] * bv[i]);
    }
    let w = gaussian_window();
    let (mu_a, out_shape) = filter_valid(&av, shape, &w);
    let (mu_b, _) = filter_valid(&bv, shape, &w);
    let (e_aa, _) = filter_valid(&aa, shape, &w);
    let (e_bb, _) = filter_valid(&bb, shape, &w);
    let (e_ab, _) = filter_valid(&ab, shape, &w);

    let count = out_shape.iter().product::<usize>();
    let mut total = 0.0;
    for i in 0..count {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / count as f64)
}

/// Normalized 1D Gaussian taps; the 3D window is their outer product.
pub fn gaussian_window() -> [f64; WINDOW] {
    let half = (WINDOW / 2) as f64;
    let mut w: [f64; WINDOW] = std::array::from_fn(|i| (-((i as f64 - half).powi(2)) / (2.0 * SIGMA * SIGMA)).exp());
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable valid-mode correlation along x, then y, then z.
fn filter_valid(data: &[f64], shape: [usize; 3], w: &[f64; WINDOW]) -> (Vec<f64>, [usize; 3]) {
    let mut cur = data.to_vec();
    let mut dims = shape;
    for axis in 0..3 {
        let mut out_dims = dims;
        out_dims[axis] = dims[axis] - WINDOW + 1;
        let mut out = vec![0.0; out_dims.iter().product()];
        let stride_in = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        for z in 0..out_dims[2] {
            for y in 0..out_dims[1] {
                for x in 0..out_dims[0] {
                    let base = x + dims[0] * (y + dims[1] * z);
                    let mut acc = 0.0;
                    for (k, wk) in w.iter().enumerate() {
                        acc += wk * cur[base + k * stride_in];
                    }
                    out[x + out_dims[0] * (y + out_dims[1] * z)] = acc;
                }
            }
        }
        cur = out;
        dims = out_dims;
    }
    (cur, dims)
}
