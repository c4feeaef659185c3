//! End-to-end compensation of low-frequency motion with a 10-node spline:
//! simulate, run the autofocus optimizer and report RPE and SSIM before and
//! after. Takes a few minutes on one core; pass `--quick` for a short run.

use std::time::Instant;

use splinemoco::autofocus::{OptimizerConfig, Stage};
use splinemoco::harness::{run_cell, SweepConfig};
use splinemoco::metrics::RunId;

fn main() -> splinemoco::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let quick = std::env::args().any(|a| a == "--quick");
    let mut cfg = SweepConfig::default();
    if quick {
        cfg.optimizer = OptimizerConfig {
            stages: vec![Stage {
                grid_size: 32,
                spacing_mm: 4.0,
                max_iterations: 4,
            }],
            ..OptimizerConfig::default()
        };
    }
    let id = RunId {
        scan_seed: 0,
        cutoff: 0.01,
        n_nodes: 10,
    };
    let t = Instant::now();
    let cell = run_cell(&cfg, id)?;
    let r = &cell.record;
    println!("finished in {:.1?} with {} evaluations", t.elapsed(), cell.compensation.evaluations);
    println!(
        "quality score {:.4} -> {:.4}",
        cell.compensation.initial_score, cell.compensation.final_score
    );
    println!(
        "RPE {:.2} -> {:.2} mm (ratio {:.3}), raw {:.2} -> {:.2} mm",
        r.rpe_before_mm, r.rpe_after_mm, r.rpe_ratio, r.rpe_before_raw_mm, r.rpe_after_raw_mm
    );
    println!("SSIM {:.3} -> {:.3} (ratio {:.3})", r.ssim_before, r.ssim_after, r.ssim_ratio);
    Ok(())
}
