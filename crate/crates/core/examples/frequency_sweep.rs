//! A miniature frequency sweep: two cutoffs, two node counts, one phantom,
//! on a reduced geometry so it finishes in about a minute. Writes records,
//! aggregates, charts and a manifest to a temporary directory.

use splinemoco::autofocus::{OptimizerConfig, Stage};
use splinemoco::geometry::ScanGeometry;
use splinemoco::harness::{run_sweep, GridSpec, SweepConfig};

fn main() -> splinemoco::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::temp_dir().join("splinemoco_sweep");
    let cfg = SweepConfig {
        seeds: vec![0],
        cutoffs: Some(vec![0.03, 0.2]),
        node_counts: vec![5, 15],
        geometry: ScanGeometry {
            detector_rows: 48,
            detector_cols: 64,
            pixel_spacing_u: 4.8,
            pixel_spacing_v: 4.8,
            ..ScanGeometry::desk_scale(60)
        },
        simulation_grid: GridSpec {
            size: 48,
            spacing_mm: 8.0 / 3.0,
        },
        evaluation_grid: GridSpec {
            size: 32,
            spacing_mm: 4.0,
        },
        optimizer: OptimizerConfig {
            stages: vec![Stage {
                grid_size: 24,
                spacing_mm: 16.0 / 3.0,
                max_iterations: 4,
            }],
            ..OptimizerConfig::default()
        },
        output_dir: out.clone(),
        ..SweepConfig::default()
    };
    let res = run_sweep(&cfg, false)?;
    for row in &res.aggregates {
        println!(
            "f_c={:<5} nodes={:<3} rpe ratio {:.3}  ssim ratio {:.3}",
            row.cutoff, row.n_nodes, row.rpe_ratio_mean, row.ssim_ratio_mean
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}
