use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autofocus::OptimizerConfig;
use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::metrics::MarkerSet;
use crate::motion::{cutoff_schedule, CutoffFrequency};

/// Log-spaced cutoff frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSchedule {
    pub n_points: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for CutoffSchedule {
    fn default() -> Self {
        Self {
            n_points: 8,
            f_min: 0.005,
            f_max: 0.5,
        }
    }
}

/// Cubic grid given by voxel count and spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub size: usize,
    pub spacing_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Each seed selects one phantom variant and, together with the cutoff,
    /// one motion realization shared by all node counts.
    pub seeds: Vec<u64>,
    pub cutoff_schedule: CutoffSchedule,
    /// Explicit cutoffs; when present they replace `cutoff_schedule`.
    pub cutoffs: Option<Vec<f64>>,
    pub node_counts: Vec<usize>,
    pub amplitude_mm: f64,
    pub amplitude_deg: f64,
    pub geometry: ScanGeometry,
    /// Grid the phantom is rendered on for forward projection.
    pub simulation_grid: GridSpec,
    /// Grid of the before/after and reference reconstructions.
    pub evaluation_grid: GridSpec,
    /// `n_nodes` is overridden per grid cell.
    pub optimizer: OptimizerConfig,
    pub markers: MarkerSet,
    pub output_dir: PathBuf,
    pub jobs: usize,
    /// Also write before/after volumes of every run.
    pub save_volumes: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            cutoff_schedule: CutoffSchedule::default(),
            cutoffs: None,
            node_counts: vec![10, 30],
            amplitude_mm: 5.0,
            amplitude_deg: 5.0,
            geometry: ScanGeometry::desk_scale(120),
            simulation_grid: GridSpec {
                size: 96,
                spacing_mm: 4.0 / 3.0,
            },
            evaluation_grid: GridSpec {
                size: 64,
                spacing_mm: 2.0,
            },
            optimizer: OptimizerConfig::default(),
            markers: MarkerSet::default(),
            output_dir: PathBuf::from("sweep_out"),
            jobs: 1,
            save_volumes: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.seeds.is_empty() {
            return bad("sweep needs at least one seed");
        }
        if self.node_counts.is_empty() {
            return bad("sweep needs at least one node count");
        }
        if self.node_counts.iter().any(|&n| n < 2 || n > self.geometry.n_projections) {
            return bad("node counts must lie in [2, n_projections]");
        }
        if !(self.amplitude_mm >= 0.0 && self.amplitude_deg >= 0.0) {
            return bad("amplitudes must be non-negative");
        }
        for g in [self.simulation_grid, self.evaluation_grid] {
            if g.size < 2 || !(g.spacing_mm > 0.0) {
                return bad("grids need at least 2 voxels per side and positive spacing");
            }
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        self.geometry.validate()?;
        self.optimizer.validate()?;
        self.markers.validate()?;
        self.frequencies().map(|_| ())
    }

    pub fn frequencies(&self) -> Result<Vec<CutoffFrequency>> {
        let f = match &self.cutoffs {
            Some(list) => list.iter().map(|&v| CutoffFrequency::new(v)).collect::<Result<Vec<_>>>()?,
            None => {
                let s = self.cutoff_schedule;
                cutoff_schedule(s.n_points, s.f_min, s.f_max)?
            }
        };
        if f.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one cutoff".into()));
        }
        Ok(f)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_vec(self)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
