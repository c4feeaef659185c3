//! Sweep orchestration over (scan seed, cutoff frequency, node count):
//! simulation, compensation, evaluation, aggregation and plots.

mod aggregate;
mod config;
mod plot;
mod records;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, mean_ci95, AggregateRow};
pub use config::{CutoffSchedule, GridSpec, SweepConfig};
pub use plot::{emit_plots, render_chart, ChartKind};
pub use records::{read_records, read_schema, write_aggregate, write_records, RecordWriter, SCHEMA_VERSION};

use crate::autofocus::{compensate, CompensationResult, OptimizerConfig};
use crate::error::{Error, Result};
use crate::geometry::{circular_trajectory, perturb_trajectory, rigid_matrix, RigidParams, ScanGeometry, Trajectory};
use crate::metrics::{evaluate_run, rpe, MetricRecord, RunId, RunInputs};
use crate::motion::{sample_motion_curve, CutoffFrequency, MotionCurve};
use crate::projector::{fdk_reconstruct, forward_project, render_phantom, PhantomSpec, Sinogram, Volume};

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const FAILURES_FILE: &str = "failures.json";
pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Seed of the motion realization for a scan and cutoff. It does not depend
/// on the node count, so cells differing only in node count are paired.
pub fn motion_seed(scan_seed: u64, cutoff: f64) -> u64 {
    let mut h = scan_seed ^ 0x6D6F_7469_6F6E_0000;
    for v in [cutoff.to_bits(), 0x9E37_79B9_7F4A_7C15] {
        h = (h ^ v).wrapping_mul(0x100_0000_01B3).rotate_left(29);
    }
    h
}

/// Motion-corrupted acquisition of one phantom variant.
pub struct SimulatedScan {
    pub phantom: Volume,
    pub curve: MotionCurve,
    pub ideal: Trajectory,
    pub gt_traj: Trajectory,
    pub sinogram: Sinogram,
}

pub fn simulate_scan(
    geom: &ScanGeometry,
    scan_seed: u64,
    cutoff: CutoffFrequency,
    amplitude_mm: f64,
    amplitude_deg: f64,
    grid: GridSpec,
) -> Result<SimulatedScan> {
    let phantom = render_phantom(&PhantomSpec::head_variant(scan_seed), [grid.size; 3], [grid.spacing_mm; 3])?;
    let curve = sample_motion_curve(motion_seed(scan_seed, cutoff.value()), geom, cutoff, amplitude_mm, amplitude_deg)?;
    let ideal = circular_trajectory(geom)?;
    let gt_traj = perturb_trajectory(&ideal, &curve)?;
    let sinogram = forward_project(&phantom, &gt_traj, geom)?;
    Ok(SimulatedScan {
        phantom,
        curve,
        ideal,
        gt_traj,
        sinogram,
    })
}

/// Composes a constant rigid transform onto every view.
pub fn apply_gauge(traj: &Trajectory, gauge: &RigidParams) -> Trajectory {
    traj.compose_constant(&rigid_matrix(gauge))
}

/// Outputs of one grid cell.
pub struct CellOutput {
    pub record: MetricRecord,
    pub compensation: CompensationResult,
    pub vol_before: Volume,
    pub vol_after: Volume,
}

/// Simulates, compensates and evaluates one grid cell. The reference volume
/// is the motion-free reconstruction of the same phantom; the before/after
/// volumes are reconstructed on the ideal and estimated trajectories after
/// removing their best global rigid offset to the true trajectory, the same
/// offset the headline RPE discounts.
pub fn run_cell(cfg: &SweepConfig, id: RunId) -> Result<CellOutput> {
    let geom = &cfg.geometry;
    let cutoff = CutoffFrequency::new(id.cutoff)?;
    let scan = simulate_scan(geom, id.scan_seed, cutoff, cfg.amplitude_mm, cfg.amplitude_deg, cfg.simulation_grid)?;
    let opt = OptimizerConfig {
        n_nodes: id.n_nodes,
        ..cfg.optimizer.clone()
    };
    let compensation = compensate(&scan.sinogram, geom, &opt)?;

    let eval = cfg.evaluation_grid;
    let (shape, spacing) = ([eval.size; 3], [eval.spacing_mm; 3]);
    let clean = forward_project(&scan.phantom, &scan.ideal, geom)?;
    let gt_volume = fdk_reconstruct(&clean, &scan.ideal, geom, shape, spacing)?;
    let gauge_before = rpe(&scan.gt_traj, &scan.ideal, &cfg.markers, geom, true)?.gauge;
    let gauge_after = rpe(&scan.gt_traj, &compensation.trajectory, &cfg.markers, geom, true)?.gauge;
    let vol_before = fdk_reconstruct(&scan.sinogram, &apply_gauge(&scan.ideal, &gauge_before), geom, shape, spacing)?;
    let vol_after = fdk_reconstruct(
        &scan.sinogram,
        &apply_gauge(&compensation.trajectory, &gauge_after),
        geom,
        shape,
        spacing,
    )?;
    let inputs = RunInputs {
        gt_traj: &scan.gt_traj,
        init_traj: &scan.ideal,
        est_traj: &compensation.trajectory,
        gt_volume: &gt_volume,
        vol_before: &vol_before,
        vol_after: &vol_after,
    };
    let record = evaluate_run(id, &inputs, &cfg.markers, geom)?;
    Ok(CellOutput {
        record,
        compensation,
        vol_before,
        vol_after,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub id: RunId,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// One record per completed cell, in grid order (seed, cutoff, nodes).
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<RunFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_sha256: String,
    pub n_records: usize,
    pub n_failures: usize,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

fn same_cell(r: &MetricRecord, id: &RunId) -> bool {
    r.scan_seed == id.scan_seed && r.n_nodes == id.n_nodes && r.cutoff.to_bits() == id.cutoff.to_bits()
}

/// Every cell of the grid in (seed, cutoff, node count) order.
pub fn grid_cells(cfg: &SweepConfig) -> Result<Vec<RunId>> {
    let freqs = cfg.frequencies()?;
    let mut cells = Vec::new();
    for &scan_seed in &cfg.seeds {
        for f in &freqs {
            for &n_nodes in &cfg.node_counts {
                cells.push(RunId {
                    scan_seed,
                    cutoff: f.value(),
                    n_nodes,
                });
            }
        }
    }
    Ok(cells)
}

/// Runs every grid cell into `cfg.output_dir`.
///
/// Records are appended to `records.csv` as cells finish. With `resume`,
/// cells already present there are skipped; otherwise the file is started
/// afresh. A failing cell is logged and listed in `failures.json`; the sweep
/// itself fails only when no cell succeeds. At the end the records file is
/// rewritten in grid order and the aggregate table, plots, config copy and
/// manifest are written next to it.
pub fn run_sweep(cfg: &SweepConfig, resume: bool) -> Result<SweepResult> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let records_path = out.join(RECORDS_FILE);
    let n_proj = cfg.geometry.n_projections;
    let existing = if resume && records_path.exists() {
        read_records(&records_path)?
    } else {
        if records_path.exists() {
            std::fs::remove_file(&records_path).map_err(|e| Error::io(&records_path, e))?;
        }
        Vec::new()
    };
    let cells = grid_cells(cfg)?;
    let pending: Vec<RunId> = cells
        .iter()
        .filter(|id| !existing.iter().any(|r| same_cell(r, id)))
        .copied()
        .collect();
    log::info!(
        "sweep: {} cells, {} already recorded, {} to run",
        cells.len(),
        cells.len() - pending.len(),
        pending.len()
    );

    let writer = Mutex::new(RecordWriter::open(&records_path, n_proj)?);
    let volume_dir = out.join("volumes");
    if cfg.save_volumes {
        std::fs::create_dir_all(&volume_dir).map_err(|e| Error::io(&volume_dir, e))?;
    }
    let run_one = |id: &RunId| -> std::result::Result<MetricRecord, RunFailure> {
        let fail = |e: Error| RunFailure {
            id: *id,
            message: e.to_string(),
        };
        let cell = run_cell(cfg, *id).map_err(fail)?;
        if cfg.save_volumes {
            let stem = format!("seed{}_fc{}_n{}", id.scan_seed, id.cutoff, id.n_nodes);
            cell.vol_before.save(&volume_dir.join(format!("{stem}_before"))).map_err(fail)?;
            cell.vol_after.save(&volume_dir.join(format!("{stem}_after"))).map_err(fail)?;
        }
        writer.lock().unwrap().append(&cell.record).map_err(fail)?;
        log::info!(
            "cell seed={} f_c={} nodes={}: rpe ratio {:.3}, ssim ratio {:.3}",
            id.scan_seed,
            id.cutoff,
            id.n_nodes,
            cell.record.rpe_ratio,
            cell.record.ssim_ratio
        );
        Ok(cell.record)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| pending.par_iter().map(run_one).collect());
    drop(writer);

    let mut fresh = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => fresh.push(r),
            Err(f) => {
                log::error!("cell {:?} failed: {}", f.id, f.message);
                failures.push(f);
            }
        }
    }
    if !pending.is_empty() && fresh.is_empty() && existing.is_empty() {
        return Err(Error::AllRunsFailed(pending.len()));
    }
    let records: Vec<MetricRecord> = cells
        .iter()
        .filter_map(|id| existing.iter().chain(&fresh).find(|r| same_cell(r, id)).cloned())
        .collect();
    write_records(&records_path, &records, n_proj)?;
    let aggregates = aggregate(&records);
    let result = SweepResult {
        records,
        aggregates,
        failures,
    };
    write_outputs(cfg, &result)?;
    Ok(result)
}

fn write_outputs(cfg: &SweepConfig, result: &SweepResult) -> Result<()> {
    let out = &cfg.output_dir;
    write_aggregate(&out.join(AGGREGATE_FILE), &result.aggregates)?;
    let failures_path = out.join(FAILURES_FILE);
    std::fs::write(&failures_path, serde_json::to_string_pretty(&result.failures)?)
        .map_err(|e| Error::io(&failures_path, e))?;
    cfg.to_json_file(&out.join(CONFIG_FILE))?;
    let mut artifacts: Vec<String> = vec![
        RECORDS_FILE.into(),
        AGGREGATE_FILE.into(),
        FAILURES_FILE.into(),
        CONFIG_FILE.into(),
    ];
    if !result.aggregates.is_empty() {
        for p in emit_plots(&result.aggregates, &cfg.node_counts, cfg.geometry.n_projections, out)? {
            artifacts.push(relative(out, &p));
        }
    }
    if cfg.save_volumes {
        let dir = out.join("volumes");
        let mut names: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| relative(out, &e.path()))
            .collect();
        names.sort();
        artifacts.extend(names);
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_sha256: cfg.hash()?,
        n_records: result.records.len(),
        n_failures: result.failures.len(),
        artifacts,
    };
    let path = out.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

fn relative(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
}

/// Re-aggregates a records file and writes `aggregate.csv` plus both charts
/// into `out`. Node counts are taken from the records.
pub fn plot_records(records_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let n_proj = read_schema(records_path)?;
    let records = read_records(records_path)?;
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no records", records_path.display())));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let rows = aggregate(&records);
    let mut nodes: Vec<usize> = records.iter().map(|r| r.n_nodes).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let agg = out.join(AGGREGATE_FILE);
    write_aggregate(&agg, &rows)?;
    let mut files = vec![agg];
    files.extend(emit_plots(&rows, &nodes, n_proj, out)?);
    Ok(files)
}

