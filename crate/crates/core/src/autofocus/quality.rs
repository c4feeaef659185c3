use serde::{Deserialize, Serialize};

use crate::projector::Volume;

/// Number of bins of the entropy histogram.
pub const HISTOGRAM_BINS: usize = 128;
/// Intensity range (1/mm) covered by the entropy histogram; values outside
/// are clamped into the end bins.
pub const HISTOGRAM_RANGE: [f64; 2] = [-0.02, 0.08];
/// Radius of the in-plane field-of-view mask as a fraction of the inscribed
/// circle of the x/y extent.
pub const FOV_FRACTION: f64 = 0.9;

/// Reference-free image quality score. Lower is better for every kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMetricKind {
    TotalVariation,
    #[default]
    HistogramEntropy,
    GradientL1,
}

impl QualityMetricKind {
    pub const ALL: [Self; 3] = [Self::TotalVariation, Self::HistogramEntropy, Self::GradientL1];

    pub fn name(self) -> &'static str {
        match self {
            Self::TotalVariation => "total_variation",
            Self::HistogramEntropy => "histogram_entropy",
            Self::GradientL1 => "gradient_l1",
        }
    }
}

impl std::str::FromStr for QualityMetricKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown quality metric '{s}'")))
    }
}

impl std::fmt::Display for QualityMetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scores `vol` with the chosen metric. Empty volumes score 0.
pub fn evaluate_quality(vol: &Volume, kind: QualityMetricKind) -> f64 {
    if vol.data.is_empty() {
        return 0.0;
    }
    match kind {
        QualityMetricKind::TotalVariation => total_variation(vol),
        QualityMetricKind::HistogramEntropy => histogram_entropy(vol),
        QualityMetricKind::GradientL1 => gradient_l1(vol),
    }
}

/// Forward differences in 1/mm^2 at voxel (x, y, z); the last layer along an
/// axis has no forward neighbour and contributes zero along that axis.
#[inline]
fn forward_diff(vol: &Volume, x: usize, y: usize, z: usize) -> [f64; 3] {
    let g = &vol.grid;
    let [nx, ny, nz] = g.shape;
    let i = g.index(x, y, z);
    let c = vol.data[i] as f64;
    let d = |cond: bool, j: usize, s: f64| if cond { (vol.data[j] as f64 - c) / s } else { 0.0 };
    [
        d(x + 1 < nx, i + 1, g.spacing[0]),
        d(y + 1 < ny, i + nx, g.spacing[1]),
        d(z + 1 < nz, i + nx * ny, g.spacing[2]),
    ]
}

fn total_variation(vol: &Volume) -> f64 {
    let [nx, ny, nz] = vol.grid.shape;
    let mut sum = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let [a, b, c] = forward_diff(vol, x, y, z);
                sum += (a * a + b * b + c * c).sqrt();
            }
        }
    }
    sum / vol.data.len() as f64
}

/// Whether column (x, y) lies inside the circular field of view.
fn fov_mask(vol: &Volume) -> Vec<bool> {
    let g = &vol.grid;
    let [nx, ny, _] = g.shape;
    let half_x = 0.5 * (nx as f64 - 1.0) * g.spacing[0];
    let half_y = 0.5 * (ny as f64 - 1.0) * g.spacing[1];
    let r = FOV_FRACTION * half_x.min(half_y);
    let mut mask = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        let dy = y as f64 * g.spacing[1] - half_y;
        for x in 0..nx {
            let dx = x as f64 * g.spacing[0] - half_x;
            mask.push(dx * dx + dy * dy <= r * r);
        }
    }
    mask
}

fn gradient_l1(vol: &Volume) -> f64 {
    let [nx, ny, nz] = vol.grid.shape;
    let mask = fov_mask(vol);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..ny {
        for x in 0..nx {
            if !mask[y * nx + x] {
                continue;
            }
            for z in 0..nz {
                let [a, b, c] = forward_diff(vol, x, y, z);
                sum += a.abs() + b.abs() + c.abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Shannon entropy (nats) of the histogram of the voxels inside the field of
/// view, with linear soft binning so the score varies continuously with the
/// voxel values.
fn histogram_entropy(vol: &Volume) -> f64 {
    let [lo, hi] = HISTOGRAM_RANGE;
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut hist = [0.0_f64; HISTOGRAM_BINS];
    let last = (HISTOGRAM_BINS - 1) as f64;
    let mask = fov_mask(vol);
    let column = vol.grid.shape[0] * vol.grid.shape[1];
    let mut n = 0usize;
    for (i, &v) in vol.data.iter().enumerate() {
        if !mask[i % column] {
            continue;
        }
        n += 1;
        // position relative to bin centers
        let t = ((v as f64 - lo) / width - 0.5).clamp(0.0, last);
        let k = (t as usize).min(HISTOGRAM_BINS - 2);
        let f = t - k as f64;
        hist[k] += 1.0 - f;
        hist[k + 1] += f;
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    hist.iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}
