//! Rigid motion curves, band-limited random motion synthesis and the Akima
//! spline motion model.

mod akima;
mod bandlimit;
mod fit;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use akima::{akima_eval, AkimaSpline};
pub use bandlimit::{band_limit, sample_bandlimited, sample_motion_curve, CutoffFrequency};
pub use fit::{fit_spline_least_squares, SplineFit};

use crate::error::{Error, Result};
use crate::geometry::RigidParams;

/// Axis names in storage order: three translations, then three rotations.
pub const AXIS_NAMES: [&str; 6] = ["t_x", "t_y", "t_z", "r_x", "r_y", "r_z"];
pub const AXIS_UNITS: [&str; 6] = ["mm", "mm", "mm", "deg", "deg", "deg"];

pub fn is_translation_axis(axis: usize) -> bool {
    axis < 3
}

/// Per-projection values of the six rigid parameters, stored axis-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "CurveDoc", try_from = "CurveDoc")]
pub struct MotionCurve {
    axes: [Vec<f64>; 6],
}

impl MotionCurve {
    pub fn zeros(n_projections: usize) -> Self {
        Self {
            axes: std::array::from_fn(|_| vec![0.0; n_projections]),
        }
    }

    pub fn from_axes(axes: [Vec<f64>; 6]) -> Result<Self> {
        let n = axes[0].len();
        if let Some(bad) = axes.iter().find(|a| a.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self { axes })
    }

    pub fn len(&self) -> usize {
        self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes[0].is_empty()
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    pub fn axis_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.axes[axis]
    }

    pub fn axes(&self) -> &[Vec<f64>; 6] {
        &self.axes
    }

    pub fn params(&self, index: usize) -> RigidParams {
        RigidParams::from_array(std::array::from_fn(|a| self.axes[a][index]))
    }

    pub fn set_params(&mut self, index: usize, p: RigidParams) {
        for (a, v) in p.to_array().into_iter().enumerate() {
            self.axes[a][index] = v;
        }
    }

    pub fn max_abs(&self, axis: usize) -> f64 {
        self.axes[axis].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes one row per projection with a `projection` index column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["projection".to_string()];
        header.extend(
            AXIS_NAMES
                .iter()
                .zip(AXIS_UNITS)
                .map(|(n, u)| format!("{n}_{u}")),
        );
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string()];
            row.extend(self.axes.iter().map(|a| a[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Serialize, Deserialize)]
struct CurveDoc {
    n_projections: usize,
    axis_names: Vec<String>,
    units: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl From<MotionCurve> for CurveDoc {
    fn from(c: MotionCurve) -> Self {
        CurveDoc {
            n_projections: c.len(),
            axis_names: AXIS_NAMES.iter().map(|s| s.to_string()).collect(),
            units: AXIS_UNITS.iter().map(|s| s.to_string()).collect(),
            values: c.axes.into_iter().collect(),
        }
    }
}

impl TryFrom<CurveDoc> for MotionCurve {
    type Error = Error;

    fn try_from(doc: CurveDoc) -> Result<Self> {
        let axes: [Vec<f64>; 6] = doc.values.try_into().map_err(|v: Vec<Vec<f64>>| {
            Error::InvalidArgument(format!("motion curve needs 6 axes, got {}", v.len()))
        })?;
        let curve = MotionCurve::from_axes(axes)?;
        if curve.len() != doc.n_projections {
            return Err(Error::LengthMismatch {
                expected: doc.n_projections,
                actual: curve.len(),
            });
        }
        Ok(curve)
    }
}

/// Six Akima splines over `n_nodes` equidistant nodes spanning projection
/// indices `0..=n_projections - 1`. The node values are the free parameters of
/// motion estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct SplineMotionModel {
    n_projections: usize,
    node_values: [Vec<f64>; 6],
}

impl SplineMotionModel {
    pub fn zeros(n_nodes: usize, n_projections: usize) -> Result<Self> {
        Self::from_node_values(std::array::from_fn(|_| vec![0.0; n_nodes]), n_projections)
    }

    pub fn from_node_values(node_values: [Vec<f64>; 6], n_projections: usize) -> Result<Self> {
        let n = node_values[0].len();
        if n < 2 || n > n_projections {
            return Err(Error::InvalidArgument(format!(
                "node count must be in [2, {n_projections}], got {n}"
            )));
        }
        if let Some(bad) = node_values.iter().find(|a| a.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self {
            n_projections,
            node_values,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_values[0].len()
    }

    pub fn n_projections(&self) -> usize {
        self.n_projections
    }

    /// Number of free parameters, `6 * n_nodes`.
    pub fn n_params(&self) -> usize {
        6 * self.n_nodes()
    }

    pub fn node_spacing(&self) -> f64 {
        (self.n_projections - 1) as f64 / (self.n_nodes() - 1) as f64
    }

    pub fn node_position(&self, k: usize) -> f64 {
        k as f64 * self.node_spacing()
    }

    pub fn node_values(&self, axis: usize) -> &[f64] {
        &self.node_values[axis]
    }

    pub fn node_values_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.node_values[axis]
    }

    /// Flattened parameter vector, axis-major.
    pub fn params(&self) -> Vec<f64> {
        self.node_values.iter().flatten().copied().collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let n = self.n_nodes();
        assert_eq!(params.len(), 6 * n, "parameter vector length");
        for (axis, chunk) in params.chunks(n).enumerate() {
            self.node_values[axis].copy_from_slice(chunk);
        }
    }

    pub fn axis_spline(&self, axis: usize) -> AkimaSpline {
        AkimaSpline::uniform(&self.node_values[axis], self.node_spacing())
    }

    /// Dense evaluation at every projection index.
    pub fn to_curve(&self) -> MotionCurve {
        let axes = std::array::from_fn(|a| self.axis_spline(a).sample_integers(self.n_projections));
        MotionCurve { axes }
    }
}

/// Evaluates the model at projection indices `0..n_projections`.
pub fn spline_to_curve(model: &SplineMotionModel, n_projections: usize) -> Result<MotionCurve> {
    if n_projections != model.n_projections() {
        return Err(Error::LengthMismatch {
            expected: model.n_projections(),
            actual: n_projections,
        });
    }
    Ok(model.to_curve())
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    n_projections: usize,
    n_nodes: usize,
    node_positions: Vec<f64>,
    axis_names: Vec<String>,
    units: Vec<String>,
    node_values: Vec<Vec<f64>>,
}

impl From<SplineMotionModel> for ModelDoc {
    fn from(m: SplineMotionModel) -> Self {
        ModelDoc {
            n_projections: m.n_projections,
            n_nodes: m.n_nodes(),
            node_positions: (0..m.n_nodes()).map(|k| m.node_position(k)).collect(),
            axis_names: AXIS_NAMES.iter().map(|s| s.to_string()).collect(),
            units: AXIS_UNITS.iter().map(|s| s.to_string()).collect(),
            node_values: m.node_values.into_iter().collect(),
        }
    }
}

impl TryFrom<ModelDoc> for SplineMotionModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let values: [Vec<f64>; 6] = doc.node_values.try_into().map_err(|v: Vec<Vec<f64>>| {
            Error::InvalidArgument(format!("spline model needs 6 axes, got {}", v.len()))
        })?;
        let model = SplineMotionModel::from_node_values(values, doc.n_projections)?;
        if model.n_nodes() != doc.n_nodes {
            return Err(Error::LengthMismatch {
                expected: doc.n_nodes,
                actual: model.n_nodes(),
            });
        }
        Ok(model)
    }
}

/// Nyquist frequency of the node grid in units of the projection rate:
/// `0.5 * (n_nodes - 1) / (n_projections - 1)`.
pub fn nyquist_limit(n_nodes: usize, n_projections: usize) -> f64 {
    0.5 * (n_nodes as f64 - 1.0) / (n_projections as f64 - 1.0)
}

/// `n_points` cutoffs equidistant in log space from `f_min` to `f_max`.
pub fn cutoff_schedule(n_points: usize, f_min: f64, f_max: f64) -> Result<Vec<CutoffFrequency>> {
    if !(f_min > 0.0 && f_min < f_max && f_max <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cutoff bounds must satisfy 0 < f_min < f_max <= 0.5, got ({f_min}, {f_max})"
        )));
    }
    if n_points == 0 {
        return Err(Error::InvalidArgument("cutoff schedule needs at least one point".into()));
    }
    if n_points == 1 {
        return Ok(vec![CutoffFrequency::new(f_min)?]);
    }
    let ratio = (f_max / f_min).ln();
    (0..n_points)
        .map(|i| {
            let v = if i + 1 == n_points {
                f_max
            } else {
                f_min * (ratio * i as f64 / (n_points - 1) as f64).exp()
            };
            CutoffFrequency::new(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nyquist_examples() {
        assert_eq!(nyquist_limit(360, 360), 0.5);
        assert_relative_eq!(nyquist_limit(100, 360), 0.5 * 99.0 / 359.0);
        assert_relative_eq!(nyquist_limit(100, 360), 0.1379, epsilon = 1e-4);
        assert_relative_eq!(nyquist_limit(30, 360), 0.0404, epsilon = 1e-4);
    }

    #[test]
    fn schedule_examples() {
        let s: Vec<f64> = cutoff_schedule(15, 0.005, 0.5)
            .unwrap()
            .iter()
            .map(|c| c.value())
            .collect();
        assert_eq!(s.len(), 15);
        assert_eq!(s[0], 0.005);
        assert_eq!(s[14], 0.5);
        let r = s[1] / s[0];
        for w in s.windows(2) {
            assert_relative_eq!(w[1] / w[0], r, epsilon = 1e-12);
        }
        let s: Vec<f64> = cutoff_schedule(2, 0.01, 0.1).unwrap().iter().map(|c| c.value()).collect();
        assert_eq!(s, vec![0.01, 0.1]);
        let s: Vec<f64> = cutoff_schedule(3, 0.01, 0.04).unwrap().iter().map(|c| c.value()).collect();
        assert_relative_eq!(s[1], 0.02, epsilon = 1e-15);
        assert!(cutoff_schedule(5, 0.1, 0.05).is_err());
        assert!(cutoff_schedule(5, 0.0, 0.05).is_err());
        assert!(cutoff_schedule(5, 0.01, 0.6).is_err());
    }

    #[test]
    fn model_node_layout() {
        let m = SplineMotionModel::zeros(10, 181).unwrap();
        assert_eq!(m.n_params(), 60);
        assert_eq!(m.node_position(0), 0.0);
        assert_eq!(m.node_position(9), 180.0);
        assert_relative_eq!(m.node_position(3), 60.0);
        assert!(SplineMotionModel::zeros(1, 10).is_err());
        assert!(SplineMotionModel::zeros(11, 10).is_err());
    }

    #[test]
    fn spline_to_curve_examples() {
        let mut values: [Vec<f64>; 6] = std::array::from_fn(|a| (0..7).map(|k| (k * a) as f64 - 1.5).collect());
        let full = SplineMotionModel::from_node_values(values.clone(), 7).unwrap();
        let curve = spline_to_curve(&full, 7).unwrap();
        for a in 0..6 {
            assert_eq!(curve.axis(a), &values[a][..]);
        }

        for v in values.iter_mut() {
            v.iter_mut().for_each(|x| *x = 2.5);
        }
        let constant = SplineMotionModel::from_node_values(values, 40).unwrap();
        let curve = constant.to_curve();
        assert!(curve.axes().iter().flatten().all(|&v| v == 2.5));

        let hat = SplineMotionModel::from_node_values(std::array::from_fn(|_| vec![0.0, 1.0, 0.0]), 5).unwrap();
        let c = spline_to_curve(&hat, 5).unwrap();
        assert_eq!([c.axis(0)[0], c.axis(0)[2], c.axis(0)[4]], [0.0, 1.0, 0.0]);
        assert!(spline_to_curve(&hat, 6).is_err());
    }

    #[test]
    fn curve_csv_has_one_row_per_projection() {
        let mut c = MotionCurve::zeros(3);
        c.axis_mut(3)[1] = 0.5;
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "projection,t_x_mm,t_y_mm,t_z_mm,r_x_deg,r_y_deg,r_z_deg");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "1,0,0,0,0.5,0,0");
    }

    #[test]
    fn json_documents_round_trip() {
        let mut c = MotionCurve::zeros(4);
        c.axis_mut(5)[2] = -1.25;
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"units\":[\"mm\",\"mm\",\"mm\",\"deg\",\"deg\",\"deg\"]"));
        assert_eq!(serde_json::from_str::<MotionCurve>(&text).unwrap(), c);

        let mut m = SplineMotionModel::zeros(3, 9).unwrap();
        m.node_values_mut(1)[2] = 4.0;
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"node_positions\":[0.0,4.0,8.0]"));
        assert_eq!(serde_json::from_str::<SplineMotionModel>(&text).unwrap(), m);

        let bad = r#"{"n_projections":2,"axis_names":[],"units":[],"values":[[0,0]]}"#;
        assert!(serde_json::from_str::<MotionCurve>(bad).is_err());
    }
}
