use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;

use super::{is_translation_axis, MotionCurve};

/// Normalized frequency `f / omega`, restricted to `(0, 0.5]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CutoffFrequency(f64);

impl CutoffFrequency {
    pub const NYQUIST: CutoffFrequency = CutoffFrequency(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 0.5 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "cutoff frequency must lie in (0, 0.5], got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CutoffFrequency {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CutoffFrequency> for f64 {
    fn from(c: CutoffFrequency) -> f64 {
        c.0
    }
}

/// Zeroes every DFT bin whose normalized frequency `min(k, n - k) / n`
/// exceeds the cutoff. The DC bin always survives.
pub fn band_limit(signal: &[f64], f_c: CutoffFrequency) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = k.min(n - k) as f64 / n as f64;
        if freq > f_c.value() {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn uniform_noise(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rescale(mut x: Vec<f64>, amplitude: f64) -> Vec<f64> {
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return x;
    }
    let s = amplitude / peak;
    x.iter_mut().for_each(|v| *v *= s);
    x
}

fn sample_stream(seed: u64, stream: u64, n_samples: usize, f_c: CutoffFrequency, amplitude: f64) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n_samples}")));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("amplitude must be positive, got {amplitude}")));
    }
    let raw = uniform_noise(seed, stream, n_samples);
    Ok(rescale(band_limit(&raw, f_c), amplitude))
}

/// Seeded random signal: i.i.d. uniform(-1, 1) samples, low-pass filtered at
/// `f_c` in the Fourier domain and rescaled so the peak magnitude equals
/// `amplitude`.
pub fn sample_bandlimited(seed: u64, n_samples: usize, f_c: CutoffFrequency, amplitude: f64) -> Result<Vec<f64>> {
    sample_stream(seed, 0, n_samples, f_c, amplitude)
}

/// Six independent band-limited signals, one per rigid axis, each drawn from
/// its own stream of the seeded generator.
pub fn sample_motion_curve(
    seed: u64,
    geom: &ScanGeometry,
    f_c: CutoffFrequency,
    amp_translation_mm: f64,
    amp_rotation_deg: f64,
) -> Result<MotionCurve> {
    geom.validate()?;
    let mut axes: [Vec<f64>; 6] = Default::default();
    for (axis, values) in axes.iter_mut().enumerate() {
        let amp = if is_translation_axis(axis) {
            amp_translation_mm
        } else {
            amp_rotation_deg
        };
        *values = sample_stream(seed, axis as u64 + 1, geom.n_projections, f_c, amp)?;
    }
    MotionCurve::from_axes(axes)
}
