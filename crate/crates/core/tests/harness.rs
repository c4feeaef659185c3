mod common;

use std::process::Command;

use splinemoco::harness::{grid_cells, read_records, run_sweep, Manifest, RECORDS_FILE};
use splinemoco::Error;

#[test]
fn single_cell_sweep_writes_one_record_and_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_sweep(dir.path());
    let res = run_sweep(&cfg, false).unwrap();
    assert_eq!(res.records.len(), 1);
    assert_eq!(res.aggregates.len(), 1);
    assert!(res.failures.is_empty());
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.config_sha256, cfg.hash().unwrap());
    assert_eq!(manifest.n_records, 1);
    for a in &manifest.artifacts {
        assert!(dir.path().join(a).exists(), "{a}");
    }
    assert!(manifest.artifacts.iter().any(|a| a == "rpe_ratio.svg"));
}

#[test]
fn reruns_and_resumes_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_sweep(dir.path());
    cfg.node_counts = vec![3, 5];
    run_sweep(&cfg, false).unwrap();
    let path = dir.path().join(RECORDS_FILE);
    let first = std::fs::read_to_string(&path).unwrap();
    let first_agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();

    run_sweep(&cfg, false).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);

    // drop the last record and resume: only that cell reruns
    let mut lines: Vec<&str> = first.lines().collect();
    lines.pop();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    std::fs::remove_file(dir.path().join("aggregate.csv")).unwrap();
    let res = run_sweep(&cfg, true).unwrap();
    assert_eq!(res.records.len(), 2);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
    assert_eq!(std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap(), first_agg);
    assert_eq!(read_records(&path).unwrap(), res.records);
    assert_eq!(grid_cells(&cfg).unwrap().len(), 2);
}

#[test]
fn sweep_fails_only_when_every_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_sweep(dir.path());
    // SSIM needs at least a 7-voxel window, so every evaluation fails
    cfg.evaluation_grid.size = 4;
    cfg.node_counts = vec![3, 4];
    match run_sweep(&cfg, false) {
        Err(Error::AllRunsFailed(n)) => assert_eq!(n, 2),
        other => panic!("expected AllRunsFailed, got {other:?}"),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splinemoco"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{:?} failed:\n{}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn command_line_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = common::tiny_sweep(&d.join("sweep"));
    cfg.geometry.to_json_file(&d.join("geom.json")).unwrap();
    run_ok(bin().args(["simulate", "--cutoff", "0.05", "--grid-size", "32", "--spacing-mm", "4"]).arg("--geometry").arg(d.join("geom.json")).arg("--out").arg(d.join("sim")));
    for f in ["sinogram.raw", "sinogram.json", "phantom.raw", "motion.json", "motion.csv", "trajectory.json"] {
        assert!(d.join("sim").join(f).exists(), "{f}");
    }
    run_ok(bin().args(["reconstruct", "--grid-size", "16", "--spacing-mm", "8"]).arg("--sinogram").arg(d.join("sim/sinogram")).arg("--out").arg(d.join("ideal")));
    run_ok(bin().args(["reconstruct", "--grid-size", "16", "--spacing-mm", "8"]).arg("--sinogram").arg(d.join("sim/sinogram")).arg("--motion").arg(d.join("sim/motion.json")).arg("--out").arg(d.join("true")));
    run_ok(bin().args(["compensate", "--nodes", "3", "--metric", "total_variation", "--max-evaluations", "40", "--stages", "12@10:1"]).arg("--sinogram").arg(d.join("sim/sinogram")).arg("--out").arg(d.join("comp")));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("comp/result.json")).unwrap()).unwrap();
    assert!(summary["evaluations"].as_u64().unwrap() <= 40);
    run_ok(bin().args(["reconstruct", "--grid-size", "16", "--spacing-mm", "8"]).arg("--sinogram").arg(d.join("sim/sinogram")).arg("--model").arg(d.join("comp/model.json")).arg("--out").arg(d.join("est")));

    cfg.to_json_file(&d.join("sweep.json")).unwrap();
    run_ok(bin().arg("sweep").arg("--config").arg(d.join("sweep.json")).arg("--out").arg(d.join("sweep")).args(["--jobs", "1"]));
    run_ok(bin().arg("sweep").arg("--config").arg(d.join("sweep.json")).arg("--out").arg(d.join("sweep")).arg("--resume"));
    run_ok(bin().arg("plot").arg("--records").arg(d.join("sweep/records.csv")).arg("--out").arg(d.join("plots")));
    assert!(d.join("plots/rpe_ratio.svg").exists() && d.join("plots/ssim_ratio.svg").exists());

    let bad = bin().args(["compensate", "--stages", "nonsense"]).arg("--sinogram").arg(d.join("sim/sinogram")).arg("--out").arg(d.join("x")).output().unwrap();
    assert!(!bad.status.success());
}
