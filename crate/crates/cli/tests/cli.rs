//! End-to-end tests of the command-line interface: exit codes, file
//! schemas, determinism, and resume behavior.

use std::path::Path;
use std::process::Command;

fn asbm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asbm"))
}

fn quick_args(cmd: &mut Command) -> &mut Command {
    cmd.args([
        "--preset",
        "quick",
        "--case",
        "diagonal",
        "--delta",
        "0.05",
        "--multiplicity",
        "1",
        "--restarts",
        "4",
        "--seed",
        "7",
    ])
}

#[test]
fn invalid_config_exits_with_code_2() {
    let out = asbm().args(["solve", "--case", "banana"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "modes = zero\n").unwrap();
    let out = asbm().arg("solve").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 1"), "{stderr}");
}

#[test]
fn solve_decoupled_spin_writes_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = quick_args(asbm().arg("solve"))
        .args(["--alpha", "0", "--emit-bath"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("record.json")).unwrap())
            .unwrap();
    assert_eq!(record["schema_version"], 1);
    let energy = record["energy"].as_f64().unwrap();
    assert!((energy + 0.025).abs() < 1e-9, "E = {energy}");
    assert!(record["converged"].as_bool().unwrap());
    assert!(out_dir.join("qf_curve.csv").exists());
    assert!(out_dir.join("displacements.csv").exists());
    let bath = std::fs::read_to_string(out_dir.join("bath.csv")).unwrap();
    assert!(bath.starts_with("k,omega_k,eta_k,lambda_k,gamma_k"));
}

#[test]
fn nonconvergence_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = quick_args(asbm().arg("solve"))
        .args(["--alpha", "0.05", "--max-sweeps", "30"])
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn run_sweep(out_dir: &Path, extra: &[&str]) -> std::process::Output {
    let mut cmd = asbm();
    quick_args(cmd.arg("sweep"))
        .args(["--alpha-min", "0.01", "--alpha-max", "0.05", "--points", "3"])
        .args(extra)
        .arg("--out")
        .arg(out_dir);
    cmd.output().unwrap()
}

#[test]
fn sweep_is_deterministic_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run_sweep(&a, &[]).status.code(), Some(0));
    assert_eq!(run_sweep(&b, &[]).status.code(), Some(0));
    let summary_a = std::fs::read(a.join("summary.csv")).unwrap();
    let summary_b = std::fs::read(b.join("summary.csv")).unwrap();
    assert_eq!(summary_a, summary_b);
    for i in 0..3 {
        let name = format!("records/point_{i:04}.json");
        let ra = std::fs::read(a.join(&name)).unwrap();
        let rb = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(ra, rb, "{name} differs between runs");
    }
}

#[test]
fn resume_skips_done_points_and_reproduces_summary() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    assert_eq!(run_sweep(&full, &[]).status.code(), Some(0));
    let reference_summary = std::fs::read(full.join("summary.csv")).unwrap();

    // Simulate an interrupted run: drop one record, mark it pending.
    let partial = dir.path().join("partial");
    copy_dir(&full, &partial);
    let manifest_path = partial.join("manifest.json");
    let mut manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    manifest["points"][1]["status"] = serde_json::Value::String("pending".into());
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    std::fs::remove_file(partial.join("records/point_0001.json")).unwrap();
    // Tag the untouched records so recomputation would be detectable.
    let keep0 = std::fs::read(partial.join("records/point_0000.json")).unwrap();
    let keep2 = std::fs::read(partial.join("records/point_0002.json")).unwrap();

    let out = run_sweep(&partial, &["--resume"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(partial.join("summary.csv")).unwrap(), reference_summary);
    assert_eq!(std::fs::read(partial.join("records/point_0000.json")).unwrap(), keep0);
    assert_eq!(std::fs::read(partial.join("records/point_0002.json")).unwrap(), keep2);
    assert!(partial.join("records/point_0001.json").exists());
}

#[test]
fn resume_aborts_on_fingerprint_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(run_sweep(&run, &[]).status.code(), Some(0));
    // Same directory, different grid: must refuse to resume.
    let mut cmd = asbm();
    quick_args(cmd.arg("sweep"))
        .args(["--alpha-min", "0.01", "--alpha-max", "0.06", "--points", "3", "--resume"])
        .arg("--out")
        .arg(&run);
    let out = cmd.output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fingerprint"), "{stderr}");
}

#[test]
fn phase_grid_emits_map_and_rejects_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("phase");
    let mut cmd = asbm();
    quick_args(cmd.arg("phase"))
        .args([
            "--delta-list",
            "0.05,0.1",
            "--alpha-min",
            "0.01",
            "--alpha-max",
            "0.09",
            "--points",
            "3",
        ])
        .arg("--out")
        .arg(&out_dir);
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("phase_map.json").exists());
    let fig = std::fs::read_to_string(out_dir.join("fig9_phase_map.csv")).unwrap();
    assert!(fig.starts_with("delta,alpha,phase"));
    assert_eq!(fig.lines().count(), 7, "2 deltas x 3 alphas + header");

    let out = asbm()
        .args(["phase", "--delta-list", "", "--alpha-min", "0.01", "--alpha-max", "0.02",
               "--points", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let mut cmd = asbm();
    quick_args(cmd.arg("bench"))
        .args(["--alpha", "0.02", "--m-list", "6,9,12", "--n-list", "1,2"])
        .arg("--out")
        .arg(&out_dir);
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let m_table = std::fs::read_to_string(out_dir.join("m_convergence.csv")).unwrap();
    assert!(m_table.starts_with("M,E_g,shift_from_largest"));
    assert_eq!(m_table.lines().count(), 4);
    let n_table = std::fs::read_to_string(out_dir.join("n_convergence.csv")).unwrap();
    assert_eq!(n_table.lines().count(), 3);
    // Variational bound: E(N = 2) <= E(N = 1).
    let rows: Vec<f64> = n_table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(rows[1] <= rows[0] + 1e-9);
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}
