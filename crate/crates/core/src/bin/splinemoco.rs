use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use splinemoco::autofocus::{compensate, OptimizerConfig, QualityMetricKind, Stage};
use splinemoco::geometry::{circular_trajectory, perturb_trajectory, ScanGeometry};
use splinemoco::harness::{plot_records, run_sweep, simulate_scan, GridSpec, SweepConfig};
use splinemoco::motion::{CutoffFrequency, MotionCurve, SplineMotionModel};
use splinemoco::projector::{fdk_reconstruct, Sinogram};
use splinemoco::{Error, Result};

#[derive(Parser)]
#[command(name = "splinemoco", version, about = "Cone-beam CT rigid motion simulation and spline autofocus compensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a phantom, sample band-limited motion and forward project it.
    Simulate(SimulateArgs),
    /// FDK reconstruction of a sinogram, optionally along a moved trajectory.
    Reconstruct(ReconstructArgs),
    /// Estimate a spline motion model by autofocus.
    Compensate(CompensateArgs),
    /// Run the (seed x cutoff x node count) experiment grid.
    Sweep(SweepArgs),
    /// Aggregate a records file and draw the ratio charts.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GeometryArg {
    /// Scan geometry JSON; defaults to the desk-scale geometry.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Projection count of the default geometry.
    #[arg(long, default_value_t = 120)]
    projections: usize,
}

impl GeometryArg {
    fn load(&self) -> Result<ScanGeometry> {
        match &self.geometry {
            Some(p) => ScanGeometry::from_json_file(p),
            None => Ok(ScanGeometry::desk_scale(self.projections)),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    geometry: GeometryArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Motion cutoff frequency in cycles per projection, in (0, 0.5].
    #[arg(long, default_value_t = 0.01)]
    cutoff: f64,
    #[arg(long, default_value_t = 5.0)]
    amplitude_mm: f64,
    #[arg(long, default_value_t = 5.0)]
    amplitude_deg: f64,
    /// Phantom grid size (voxels per side).
    #[arg(long, default_value_t = 96)]
    grid_size: usize,
    #[arg(long, default_value_t = 4.0 / 3.0)]
    spacing_mm: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Sinogram base path (without .raw/.json).
    #[arg(long)]
    sinogram: PathBuf,
    /// Motion curve JSON to reconstruct along instead of the ideal circle.
    #[arg(long, conflicts_with = "model")]
    motion: Option<PathBuf>,
    /// Spline motion model JSON, e.g. from `compensate`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    grid_size: usize,
    #[arg(long, default_value_t = 2.0)]
    spacing_mm: f64,
    /// Output volume base path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompensateArgs {
    #[arg(long)]
    sinogram: PathBuf,
    /// Optimizer config JSON; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    /// total_variation, histogram_entropy or gradient_l1.
    #[arg(long)]
    metric: Option<QualityMetricKind>,
    #[arg(long)]
    max_evaluations: Option<usize>,
    /// Comma-separated SIZE@SPACING:ITERATIONS, e.g. "32@4:12,48@2.667:6".
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// Skip cells already present in the output's records file.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_stages(text: &str) -> Result<Vec<Stage>> {
    let bad = || Error::InvalidArgument(format!("stage schedule '{text}' is not SIZE@SPACING:ITERATIONS[,...]"));
    text.split(',')
        .map(|item| {
            let (size, rest) = item.trim().split_once('@').ok_or_else(bad)?;
            let (spacing, iters) = rest.split_once(':').ok_or_else(bad)?;
            Ok(Stage {
                grid_size: size.parse().map_err(|_| bad())?,
                spacing_mm: spacing.parse().map_err(|_| bad())?,
                max_iterations: iters.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let geom = a.geometry.load()?;
    let grid = GridSpec {
        size: a.grid_size,
        spacing_mm: a.spacing_mm,
    };
    let scan = simulate_scan(&geom, a.seed, CutoffFrequency::new(a.cutoff)?, a.amplitude_mm, a.amplitude_deg, grid)?;
    create_dir(&a.out)?;
    scan.sinogram.save(&a.out.join("sinogram"), &geom)?;
    scan.phantom.save(&a.out.join("phantom"))?;
    write_json(&a.out.join("motion.json"), &scan.curve)?;
    scan.curve.to_csv_file(&a.out.join("motion.csv"))?;
    write_json(&a.out.join("trajectory.json"), &scan.gt_traj)?;
    geom.to_json_file(&a.out.join("geometry.json"))?;
    println!("wrote sinogram, phantom, motion and trajectory to {}", a.out.display());
    Ok(())
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let (sino, geom) = Sinogram::load(&a.sinogram)?;
    let ideal = circular_trajectory(&geom)?;
    let curve: Option<MotionCurve> = match (&a.motion, &a.model) {
        (Some(p), _) => Some(read_json(p)?),
        (None, Some(p)) => Some(read_json::<SplineMotionModel>(p)?.to_curve()),
        (None, None) => None,
    };
    let traj = match curve {
        Some(c) => perturb_trajectory(&ideal, &c)?,
        None => ideal,
    };
    let vol = fdk_reconstruct(&sino, &traj, &geom, [a.grid_size; 3], [a.spacing_mm; 3])?;
    vol.save(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn compensate_cmd(a: CompensateArgs) -> Result<()> {
    let (sino, geom) = Sinogram::load(&a.sinogram)?;
    let mut cfg: OptimizerConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => OptimizerConfig::default(),
    };
    if let Some(n) = a.nodes {
        cfg.n_nodes = n;
    }
    if let Some(m) = a.metric {
        cfg.metric = m;
    }
    if let Some(b) = a.max_evaluations {
        cfg.max_evaluations = b;
    }
    if let Some(s) = &a.stages {
        cfg.stages = parse_stages(s)?;
    }
    let res = compensate(&sino, &geom, &cfg)?;
    create_dir(&a.out)?;
    write_json(&a.out.join("result.json"), &res.summary())?;
    write_json(&a.out.join("model.json"), &res.model)?;
    write_json(&a.out.join("trajectory.json"), &res.trajectory)?;
    write_json(&a.out.join("optimizer.json"), &cfg)?;
    res.model.to_curve().to_csv_file(&a.out.join("motion.csv"))?;
    res.volume.save(&a.out.join("volume"))?;
    println!(
        "score {:.6e} -> {:.6e} after {} evaluations; results in {}",
        res.initial_score,
        res.final_score,
        res.evaluations,
        a.out.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::from_json_file(&a.config)?;
    cfg.output_dir = a.out;
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    let res = run_sweep(&cfg, a.resume)?;
    println!(
        "{} records, {} failures; outputs in {}",
        res.records.len(),
        res.failures.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    for f in plot_records(&a.records, &a.out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Compensate(a) => compensate_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
