use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rigid_matrix, RigidParams};

use super::{Grid, Volume};

/// Ellipsoid with additive attenuation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    #[serde(rename = "center_mm")]
    pub center: [f64; 3],
    #[serde(rename = "semi_axes_mm")]
    pub semi_axes: [f64; 3],
    /// Euler angles in degrees, same convention as [`RigidParams`].
    #[serde(rename = "rotation_deg", default)]
    pub rotation: [f64; 3],
    #[serde(rename = "value_per_mm")]
    pub value: f64,
}

impl Ellipsoid {
    pub fn sphere(center: [f64; 3], radius: f64, value: f64) -> Self {
        Self {
            center,
            semi_axes: [radius; 3],
            rotation: [0.0; 3],
            value,
        }
    }

    fn inverse_rotation(&self) -> Matrix3<f64> {
        let r = rigid_matrix(&RigidParams {
            r_x: self.rotation[0],
            r_y: self.rotation[1],
            r_z: self.rotation[2],
            ..Default::default()
        });
        r.fixed_view::<3, 3>(0, 0).transpose()
    }
}

/// Sum of ellipsoids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub ellipsoids: Vec<Ellipsoid>,
}

// Normalized 3D Shepp-Logan layout: (value, semi-axes, center, z-rotation deg).
// The skull shell is thickened so it survives 2 mm voxels.
const HEAD_LAYOUT: [(f64, [f64; 3], [f64; 3], f64); 10] = [
    (0.050, [0.69, 0.92, 0.81], [0.0, 0.0, 0.0], 0.0),
    (-0.030, [0.62, 0.85, 0.74], [0.0, -0.0184, 0.0], 0.0),
    (-0.005, [0.11, 0.31, 0.22], [0.22, 0.0, 0.0], -18.0),
    (-0.005, [0.16, 0.41, 0.28], [-0.22, 0.0, 0.0], 18.0),
    (0.004, [0.21, 0.25, 0.41], [0.0, 0.35, -0.15], 0.0),
    (0.006, [0.046, 0.046, 0.05], [0.0, 0.1, 0.25], 0.0),
    (0.006, [0.046, 0.046, 0.05], [0.0, -0.1, 0.25], 0.0),
    (0.008, [0.046, 0.023, 0.05], [-0.08, -0.605, 0.0], 0.0),
    (0.008, [0.023, 0.023, 0.02], [0.0, -0.606, 0.0], 0.0),
    (0.008, [0.023, 0.046, 0.02], [0.06, -0.605, 0.0], 0.0),
];

/// Scale from normalized phantom coordinates to millimetres.
pub const HEAD_SCALE_MM: f64 = 65.0;

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.ellipsoids.iter().enumerate() {
            if !e.semi_axes.iter().all(|&a| a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!("ellipsoid {i} has non-positive semi-axes {:?}", e.semi_axes)));
            }
        }
        Ok(())
    }

    /// Head-like phantom: a bone shell around soft tissue (about 0.02 /mm)
    /// with low-contrast interior structures. About 120 mm tall and wide so
    /// that it fits a 128 mm field of view.
    pub fn head() -> Self {
        let ellipsoids = HEAD_LAYOUT
            .iter()
            .map(|&(value, axes, center, rot_z)| Ellipsoid {
                center: center.map(|c| c * HEAD_SCALE_MM),
                semi_axes: axes.map(|a| a * HEAD_SCALE_MM),
                rotation: [0.0, 0.0, rot_z],
                value,
            })
            .collect();
        Self { ellipsoids }
    }

    /// Seeded variation of [`PhantomSpec::head`], standing in for different
    /// patients: interior structures move by up to 3 mm, change size by up
    /// to 10% and contrast by up to 25%; the whole head is scaled by up to
    /// 4% and turned by up to 10 degrees about z.
    pub fn head_variant(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let global_scale = 1.0 + rng.gen_range(-0.04..0.0);
        let turn = rng.gen_range(-10.0..10.0_f64);
        let (s, c) = turn.to_radians().sin_cos();
        let mut spec = Self::head();
        for (i, e) in spec.ellipsoids.iter_mut().enumerate() {
            if i >= 2 {
                for a in 0..3 {
                    e.center[a] += rng.gen_range(-3.0..3.0);
                    e.semi_axes[a] *= 1.0 + rng.gen_range(-0.1..0.1);
                }
                e.value *= 1.0 + rng.gen_range(-0.25..0.25);
            }
            e.center = e.center.map(|v| v * global_scale);
            e.semi_axes = e.semi_axes.map(|v| v * global_scale);
            let [x, y, z] = e.center;
            e.center = [c * x - s * y, s * x + c * y, z];
            e.rotation[2] += turn;
        }
        spec
    }
}

/// Samples the phantom at voxel centers.
pub fn render_phantom(spec: &PhantomSpec, shape: [usize; 3], spacing: [f64; 3]) -> Result<Volume> {
    spec.validate()?;
    let grid = Grid::centered(shape, spacing);
    grid.validate()?;
    let mut vol = Volume::zeros(grid);
    for e in &spec.ellipsoids {
        let inv = e.inverse_rotation();
        let inv_axes = Vector3::from(e.semi_axes.map(|a| 1.0 / a));
        let center = Vector3::from(e.center);
        let value = e.value as f32;
        for z in 0..shape[2] {
            for y in 0..shape[1] {
                for x in 0..shape[0] {
                    let p = Vector3::from(grid.position(x, y, z)) - center;
                    let q = (inv * p).component_mul(&inv_axes);
                    if q.norm_squared() <= 1.0 {
                        vol.data[grid.index(x, y, z)] += value;
                    }
                }
            }
        }
    }
    Ok(vol)
}
