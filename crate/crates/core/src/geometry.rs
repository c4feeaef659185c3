//! Circular cone-beam scan geometry, projection matrices and rigid motion.
//!
//! World coordinates are millimetres with the isocenter at the origin. The
//! source orbits the z-axis in the `z = 0` plane; detector `u` runs tangent to
//! the orbit (column index) and `v` parallel to the rotation axis (row index).
//! A [`ProjectionMatrix`] maps homogeneous world points to homogeneous pixel
//! coordinates and is stored normalized so that the third homogeneous
//! coordinate equals the depth of the point along the principal ray, in mm.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Point3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionCurve;

/// Scanner description for a circular cone-beam acquisition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGeometry {
    pub n_projections: usize,
    #[serde(rename = "angular_range_rad")]
    pub angular_range: f64,
    #[serde(rename = "sid_mm")]
    pub source_isocenter_dist: f64,
    #[serde(rename = "sdd_mm")]
    pub source_detector_dist: f64,
    pub detector_rows: usize,
    pub detector_cols: usize,
    #[serde(rename = "pixel_spacing_u_mm")]
    pub pixel_spacing_u: f64,
    #[serde(rename = "pixel_spacing_v_mm")]
    pub pixel_spacing_v: f64,
    /// Projections per second. Frequencies elsewhere are expressed as
    /// fractions of this rate, so the nominal value rarely matters.
    #[serde(rename = "sampling_rate_per_s")]
    pub sampling_rate_omega: f64,
}

impl Default for ScanGeometry {
    /// Full circular scan with 360 views, SID 785 mm, SDD 1200 mm and a
    /// 500 x 700 detector of 0.64 mm pixels.
    fn default() -> Self {
        Self {
            n_projections: 360,
            angular_range: 2.0 * PI,
            source_isocenter_dist: 785.0,
            source_detector_dist: 1200.0,
            detector_rows: 500,
            detector_cols: 700,
            pixel_spacing_u: 0.64,
            pixel_spacing_v: 0.64,
            sampling_rate_omega: 1.0,
        }
    }
}

impl ScanGeometry {
    /// Reduced scanner used for desk-scale experiments: same source distances,
    /// `n_projections` views and a coarse detector that still covers a
    /// head-sized object.
    pub fn desk_scale(n_projections: usize) -> Self {
        Self {
            n_projections,
            detector_rows: 96,
            detector_cols: 128,
            pixel_spacing_u: 2.4,
            pixel_spacing_v: 2.4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.n_projections < 2 {
            return fail(format!("need at least 2 projections, got {}", self.n_projections));
        }
        if !(self.source_isocenter_dist > 0.0) {
            return fail(format!(
                "source-isocenter distance must be positive, got {}",
                self.source_isocenter_dist
            ));
        }
        if !(self.source_detector_dist > self.source_isocenter_dist) {
            return fail(format!(
                "source-detector distance {} must exceed source-isocenter distance {}",
                self.source_detector_dist, self.source_isocenter_dist
            ));
        }
        if self.detector_rows < 2 || self.detector_cols < 2 {
            return fail("detector needs at least two rows and two columns".into());
        }
        if !(self.pixel_spacing_u > 0.0 && self.pixel_spacing_v > 0.0) {
            return fail("pixel spacings must be positive".into());
        }
        if !(self.angular_range > 0.0 && self.angular_range.is_finite()) {
            return fail(format!("angular range must be positive, got {}", self.angular_range));
        }
        if !(self.sampling_rate_omega > 0.0) {
            return fail("sampling rate must be positive".into());
        }
        Ok(())
    }

    /// Source angle of view `index` in radians. The endpoint of a full scan is
    /// excluded so that no view is duplicated.
    pub fn source_angle(&self, index: usize) -> f64 {
        index as f64 * self.angular_range / self.n_projections as f64
    }

    pub fn angular_step(&self) -> f64 {
        self.angular_range / self.n_projections as f64
    }

    /// Detector center in pixel coordinates `(u, v)`.
    pub fn principal_point(&self) -> (f64, f64) {
        (
            (self.detector_cols as f64 - 1.0) / 2.0,
            (self.detector_rows as f64 - 1.0) / 2.0,
        )
    }

    pub fn magnification(&self) -> f64 {
        self.source_detector_dist / self.source_isocenter_dist
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let geom: Self = serde_json::from_str(&text)?;
        geom.validate()?;
        Ok(geom)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// 3x4 matrix mapping homogeneous world coordinates (mm) to homogeneous
/// detector coordinates (pixels).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix(pub Matrix3x4<f64>);

impl ProjectionMatrix {
    /// Rescales so that the third row's 3x3 part is a unit vector and points
    /// in front of the source have positive depth.
    pub fn normalized(m: Matrix3x4<f64>) -> Result<Self, ()> {
        let r3 = Vector3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        let n = r3.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(());
        }
        let det = m.fixed_view::<3, 3>(0, 0).determinant();
        if det.abs() < 1e-12 * n * n * n {
            return Err(());
        }
        // Positive determinant of the left block puts the viewing direction
        // along +r3 for an upright camera.
        let s = if det > 0.0 { 1.0 / n } else { -1.0 / n };
        Ok(Self(m * s))
    }

    pub fn left_block(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Homogeneous image of a world point.
    pub fn apply(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.0 * Vector4::new(p.x, p.y, p.z, 1.0)
    }

    /// Pixel coordinates of `p`, or `None` if it lies on or behind the source
    /// plane.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        let h = self.apply(p);
        (h.z > 0.0).then(|| (h.x / h.z, h.y / h.z))
    }

    /// Source position, the right null space of the matrix.
    pub fn camera_center(&self) -> Option<Point3<f64>> {
        let inv = self.left_block().try_inverse()?;
        let p4 = Vector3::new(self.0[(0, 3)], self.0[(1, 3)], self.0[(2, 3)]);
        Some(Point3::from(-(inv * p4)))
    }

    /// Right-multiplies by a 4x4 homogeneous transform acting on world points.
    pub fn compose(&self, t: &Matrix4<f64>) -> Self {
        Self(self.0 * t)
    }
}

/// Six rigid pose parameters: translations in mm, Euler angles in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RigidParams {
    #[serde(rename = "t_x_mm")]
    pub t_x: f64,
    #[serde(rename = "t_y_mm")]
    pub t_y: f64,
    #[serde(rename = "t_z_mm")]
    pub t_z: f64,
    #[serde(rename = "r_x_deg")]
    pub r_x: f64,
    #[serde(rename = "r_y_deg")]
    pub r_y: f64,
    #[serde(rename = "r_z_deg")]
    pub r_z: f64,
}

impl RigidParams {
    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            t_x: v[0],
            t_y: v[1],
            t_z: v[2],
            r_x: v[3],
            r_y: v[4],
            r_z: v[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.t_x, self.t_y, self.t_z, self.r_x, self.r_y, self.r_z]
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&v| v == 0.0)
    }
}

/// Homogeneous transform `Translation(t) * Rz * Ry * Rx`, i.e. extrinsic
/// rotations about x, then y, then z, followed by the translation.
pub fn rigid_matrix(p: &RigidParams) -> Matrix4<f64> {
    let (sx, cx) = p.r_x.to_radians().sin_cos();
    let (sy, cy) = p.r_y.to_radians().sin_cos();
    let (sz, cz) = p.r_z.to_radians().sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    let r = rz * ry * rx;
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    t[(0, 3)] = p.t_x;
    t[(1, 3)] = p.t_y;
    t[(2, 3)] = p.t_z;
    t
}

/// Ordered projection matrices, one per view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub matrices: Vec<ProjectionMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Applies the same world transform to every view.
    pub fn compose_constant(&self, t: &Matrix4<f64>) -> Self {
        Self {
            matrices: self.matrices.iter().map(|m| m.compose(t)).collect(),
        }
    }
}

/// Projection matrix of a single view of the ideal circular orbit.
pub fn circular_view(geom: &ScanGeometry, index: usize) -> ProjectionMatrix {
    let beta = geom.source_angle(index);
    let (sb, cb) = beta.sin_cos();
    let source = Vector3::new(geom.source_isocenter_dist * cb, geom.source_isocenter_dist * sb, 0.0);
    // Camera axes as rows: u tangent, v along the rotation axis, w toward the
    // isocenter. u x v = w keeps the rotation proper.
    let rot = Matrix3::new(sb, -cb, 0.0, 0.0, 0.0, 1.0, -cb, -sb, 0.0);
    let (cu, cv) = geom.principal_point();
    let k = Matrix3::new(
        geom.source_detector_dist / geom.pixel_spacing_u,
        0.0,
        cu,
        0.0,
        geom.source_detector_dist / geom.pixel_spacing_v,
        cv,
        0.0,
        0.0,
        1.0,
    );
    let mut ext = Matrix3x4::zeros();
    ext.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    let t = -(rot * source);
    ext[(0, 3)] = t.x;
    ext[(1, 3)] = t.y;
    ext[(2, 3)] = t.z;
    // K has unit third row and R is orthonormal, so this is already normalized.
    ProjectionMatrix(k * ext)
}

/// Equiangular views of the unperturbed circular orbit.
pub fn circular_trajectory(geom: &ScanGeometry) -> Result<Trajectory> {
    geom.validate()?;
    Ok(Trajectory {
        matrices: (0..geom.n_projections).map(|i| circular_view(geom, i)).collect(),
    })
}

/// Rigidly moves the object during the scan: view `i` becomes `P_i * T_i`
/// with `T_i = rigid_matrix(curve[i])`. Views with zero motion are copied
/// unchanged.
pub fn perturb_trajectory(traj: &Trajectory, curve: &MotionCurve) -> Result<Trajectory> {
    if curve.len() != traj.len() {
        return Err(Error::LengthMismatch {
            expected: traj.len(),
            actual: curve.len(),
        });
    }
    let matrices = traj
        .matrices
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let p = curve.params(i);
            if p.is_zero() {
                *m
            } else {
                m.compose(&rigid_matrix(&p))
            }
        })
        .collect();
    Ok(Trajectory { matrices })
}
