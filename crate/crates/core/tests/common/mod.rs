#![allow(dead_code)]

use std::path::Path;

use splinemoco::autofocus::{OptimizerConfig, Stage};
use splinemoco::geometry::ScanGeometry;
use splinemoco::harness::{GridSpec, SweepConfig};

/// A sweep small enough to run a cell in a few seconds.
pub fn tiny_sweep(out: &Path) -> SweepConfig {
    SweepConfig {
        seeds: vec![0],
        cutoffs: Some(vec![0.05]),
        node_counts: vec![4],
        geometry: ScanGeometry {
            detector_rows: 32,
            detector_cols: 44,
            pixel_spacing_u: 7.0,
            pixel_spacing_v: 7.0,
            ..ScanGeometry::desk_scale(30)
        },
        simulation_grid: GridSpec {
            size: 32,
            spacing_mm: 4.0,
        },
        evaluation_grid: GridSpec {
            size: 16,
            spacing_mm: 8.0,
        },
        optimizer: OptimizerConfig {
            max_evaluations: 200,
            stages: vec![Stage {
                grid_size: 12,
                spacing_mm: 10.0,
                max_iterations: 2,
            }],
            ..OptimizerConfig::default()
        },
        output_dir: out.to_path_buf(),
        ..SweepConfig::default()
    }
}
