use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;

/// Regular voxel grid: `shape` voxels of `spacing` mm, with `origin` the world
/// position of the center of voxel `(0, 0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub shape: [usize; 3],
    #[serde(rename = "spacing_mm")]
    pub spacing: [f64; 3],
    #[serde(rename = "origin_mm")]
    pub origin: [f64; 3],
}

impl Grid {
    /// Grid whose center coincides with the isocenter.
    pub fn centered(shape: [usize; 3], spacing: [f64; 3]) -> Self {
        let origin = std::array::from_fn(|a| -0.5 * (shape[a] as f64 - 1.0) * spacing[a]);
        Self { shape, spacing, origin }
    }

    pub fn cubic(n: usize, spacing: f64) -> Self {
        Self::centered([n; 3], [spacing; 3])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::ShapeMismatch(format!("empty grid {:?}", self.shape)));
        }
        if !self.spacing.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {:?}", self.spacing)));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    /// World position of a voxel center.
    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin[0] + x as f64 * self.spacing[0],
            self.origin[1] + y as f64 * self.spacing[1],
            self.origin[2] + z as f64 * self.spacing[2],
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }
}

/// 3D attenuation grid, stored x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub grid: Grid,
    pub data: Vec<f32>,
}

impl Volume {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_data(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.grid.shape
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Trilinear interpolation at a world position; zero outside the grid of
    /// voxel centers.
    #[inline]
    pub fn sample(&self, p: [f64; 3]) -> f32 {
        let g = &self.grid;
        let fx = (p[0] - g.origin[0]) / g.spacing[0];
        let fy = (p[1] - g.origin[1]) / g.spacing[1];
        let fz = (p[2] - g.origin[2]) / g.spacing[2];
        trilinear(&self.data, g.shape, fx, fy, fz)
    }

    pub fn save(&self, base: &Path) -> Result<()> {
        let sidecar = RawSidecar {
            kind: "volume".into(),
            shape: self.grid.shape.to_vec(),
            spacing_mm: Some(self.grid.spacing),
            origin_mm: Some(self.grid.origin),
            units: "1/mm".into(),
            axis_order: "x-fastest (x, y, z)".into(),
            dtype: "float32-le".into(),
            geometry: None,
        };
        write_raw(base, &self.data, &sidecar)
    }

    pub fn load(base: &Path) -> Result<Self> {
        let (sidecar, data) = read_raw(base, "volume")?;
        let shape: [usize; 3] = sidecar
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::ShapeMismatch(format!("volume shape must have 3 entries, got {:?}", sidecar.shape)))?;
        let grid = Grid {
            shape,
            spacing: sidecar.spacing_mm.ok_or_else(|| Error::InvalidArgument("volume sidecar lacks spacing_mm".into()))?,
            origin: sidecar.origin_mm.ok_or_else(|| Error::InvalidArgument("volume sidecar lacks origin_mm".into()))?,
        };
        grid.validate()?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("volume contains non-finite values".into()));
        }
        Volume::from_data(grid, data)
    }
}

#[inline]
pub(crate) fn trilinear(data: &[f32], shape: [usize; 3], fx: f64, fy: f64, fz: f64) -> f32 {
    let [nx, ny, nz] = shape;
    if !(fx > -1.0 && fy > -1.0 && fz > -1.0 && fx < nx as f64 && fy < ny as f64 && fz < nz as f64) {
        return 0.0;
    }
    let x0 = fx.floor();
    let y0 = fy.floor();
    let z0 = fz.floor();
    let (wx, wy, wz) = ((fx - x0) as f32, (fy - y0) as f32, (fz - z0) as f32);
    let (x0, y0, z0) = (x0 as isize, y0 as isize, z0 as isize);
    let at = |x: isize, y: isize, z: isize| -> f32 {
        if x < 0 || y < 0 || z < 0 || x >= nx as isize || y >= ny as isize || z >= nz as isize {
            0.0
        } else {
            data[x as usize + nx * (y as usize + ny * z as usize)]
        }
    };
    let interior = x0 >= 0 && y0 >= 0 && z0 >= 0 && x0 + 1 < nx as isize && y0 + 1 < ny as isize && z0 + 1 < nz as isize;
    let (c000, c100, c010, c110, c001, c101, c011, c111) = if interior {
        let i = x0 as usize + nx * (y0 as usize + ny * z0 as usize);
        let sy = nx;
        let sz = nx * ny;
        (
            data[i],
            data[i + 1],
            data[i + sy],
            data[i + sy + 1],
            data[i + sz],
            data[i + sz + 1],
            data[i + sz + sy],
            data[i + sz + sy + 1],
        )
    } else {
        (
            at(x0, y0, z0),
            at(x0 + 1, y0, z0),
            at(x0, y0 + 1, z0),
            at(x0 + 1, y0 + 1, z0),
            at(x0, y0, z0 + 1),
            at(x0 + 1, y0, z0 + 1),
            at(x0, y0 + 1, z0 + 1),
            at(x0 + 1, y0 + 1, z0 + 1),
        )
    };
    let c00 = c000 + (c100 - c000) * wx;
    let c10 = c010 + (c110 - c010) * wx;
    let c01 = c001 + (c101 - c001) * wx;
    let c11 = c011 + (c111 - c011) * wx;
    let c0 = c00 + (c10 - c00) * wy;
    let c1 = c01 + (c11 - c01) * wy;
    c0 + (c1 - c0) * wz
}

/// Projection images indexed `[projection][row][col]`, column-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    pub n_projections: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Sinogram {
    pub fn zeros(geom: &ScanGeometry) -> Self {
        Self {
            n_projections: geom.n_projections,
            rows: geom.detector_rows,
            cols: geom.detector_cols,
            data: vec![0.0; geom.n_projections * geom.detector_rows * geom.detector_cols],
        }
    }

    pub fn view_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn view(&self, i: usize) -> &[f32] {
        let n = self.view_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn check_geometry(&self, geom: &ScanGeometry) -> Result<()> {
        if self.n_projections != geom.n_projections || self.rows != geom.detector_rows || self.cols != geom.detector_cols {
            return Err(Error::ShapeMismatch(format!(
                "sinogram {}x{}x{} does not match geometry {}x{}x{}",
                self.n_projections, self.rows, self.cols, geom.n_projections, geom.detector_rows, geom.detector_cols
            )));
        }
        if self.data.len() != self.n_projections * self.view_len() {
            return Err(Error::LengthMismatch {
                expected: self.n_projections * self.view_len(),
                actual: self.data.len(),
            });
        }
        Ok(())
    }

    pub fn max(&self) -> f32 {
        self.data.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn save(&self, base: &Path, geom: &ScanGeometry) -> Result<()> {
        let sidecar = RawSidecar {
            kind: "sinogram".into(),
            shape: vec![self.n_projections, self.rows, self.cols],
            spacing_mm: None,
            origin_mm: None,
            units: "line integral (dimensionless)".into(),
            axis_order: "col-fastest (projection, row, col)".into(),
            dtype: "float32-le".into(),
            geometry: Some(geom.clone()),
        };
        write_raw(base, &self.data, &sidecar)
    }

    /// Loads a sinogram together with the geometry recorded in its sidecar.
    pub fn load(base: &Path) -> Result<(Self, ScanGeometry)> {
        let (sidecar, data) = read_raw(base, "sinogram")?;
        let geom = sidecar
            .geometry
            .ok_or_else(|| Error::InvalidArgument("sinogram sidecar lacks geometry".into()))?;
        geom.validate()?;
        let [n, rows, cols]: [usize; 3] = sidecar
            .shape
            .as_slice()
            .try_into()
            .map_err(|_| Error::ShapeMismatch(format!("sinogram shape must have 3 entries, got {:?}", sidecar.shape)))?;
        let sino = Sinogram {
            n_projections: n,
            rows,
            cols,
            data,
        };
        sino.check_geometry(&geom)?;
        Ok((sino, geom))
    }
}

#[derive(Serialize, Deserialize)]
struct RawSidecar {
    kind: String,
    shape: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    spacing_mm: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    origin_mm: Option<[f64; 3]>,
    units: String,
    axis_order: String,
    dtype: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    geometry: Option<ScanGeometry>,
}

/// `base.raw` and `base.json` for a given base path (any extension on `base`
/// is replaced).
pub fn raw_paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("raw"), base.with_extension("json"))
}

fn write_raw(base: &Path, data: &[f32], sidecar: &RawSidecar) -> Result<()> {
    let (raw, json) = raw_paths(base);
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
    std::fs::write(&json, serde_json::to_string_pretty(sidecar)?).map_err(|e| Error::io(&json, e))
}

fn read_raw(base: &Path, kind: &str) -> Result<(RawSidecar, Vec<f32>)> {
    let (raw, json) = raw_paths(base);
    let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let sidecar: RawSidecar = serde_json::from_str(&text)?;
    if sidecar.kind != kind {
        return Err(Error::InvalidArgument(format!("{} holds a {}, expected a {kind}", json.display(), sidecar.kind)));
    }
    if sidecar.dtype != "float32-le" {
        return Err(Error::InvalidArgument(format!("unsupported dtype {}", sidecar.dtype)));
    }
    let bytes = std::fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected: usize = sidecar.shape.iter().product();
    if bytes.len() != expected * 4 {
        return Err(Error::LengthMismatch {
            expected: expected * 4,
            actual: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((sidecar, data))
}
