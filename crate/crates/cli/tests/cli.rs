use std::path::Path;
use std::process::Command;
use tempfile::tempdir;
use tumorlim::limit::SweepKind;
use tumorlim_cli::output::{parse_trajectory, TRAJECTORY_HEADER};
use tumorlim_cli::{simulate, sweep, verify, Config, Status, VerifyError};

fn small() -> Config {
    let mut c = Config::default();
    c.grid.cells = 50;
    c.time.t_end = 0.05;
    c.time.snapshots = 5;
    c
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

const DATA_FILES: [&str; 3] = ["trajectory.csv", "diagnostics.csv", "summary.json"];

#[test]
fn default_run_emits_all_files_and_verifies() {
    let dir = tempdir().unwrap();
    let m = simulate(&small(), dir.path()).unwrap();
    assert!(m.all_passed(), "{:?}", m.checks);
    for f in DATA_FILES.iter().chain(&["manifest.json", "config.toml"]) {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let report = verify(dir.path()).unwrap();
    assert_eq!(report.directories, 1);
    assert!(report.checks.contains(&"mass_balance".to_string()));
    assert!(report.checks.contains(&"segregation".to_string()));
}

#[test]
fn zero_horizon_writes_initial_snapshot_only() {
    let mut c = small();
    c.time.t_end = 0.0;
    let dir = tempdir().unwrap();
    simulate(&c, dir.path()).unwrap();
    let text = String::from_utf8(read(dir.path(), "trajectory.csv")).unwrap();
    assert!(text.starts_with(TRAJECTORY_HEADER));
    let rows = parse_trajectory(&text).unwrap();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r.t == 0.0));
    verify(dir.path()).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    let ma = simulate(&small(), a.path()).unwrap();
    let mb = simulate(&small(), b.path()).unwrap();
    for f in DATA_FILES {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_eq!(ma.outputs, mb.outputs);
    assert_eq!(ma.config_hash, mb.config_hash);
}

#[test]
fn corrupted_trajectory_is_named() {
    let dir = tempdir().unwrap();
    simulate(&small(), dir.path()).unwrap();
    let path = dir.path().join("trajectory.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("garbage\n");
    std::fs::write(&path, text).unwrap();
    assert!(verify(dir.path()).unwrap_err().to_string().contains("trajectory.csv"));
}

#[test]
fn empty_directory_is_missing_manifest() {
    let dir = tempdir().unwrap();
    let err = verify(dir.path()).unwrap_err();
    assert!(matches!(err, VerifyError::MissingManifest(_)));
    assert!(err.to_string().contains("missing manifest"));
}

#[test]
fn sweep_member_count_matches_list() {
    let mut c = small();
    c.sweep.kappas = vec![0.5, 0.2, 0.1];
    let dir = tempdir().unwrap();
    let m = sweep(&c, SweepKind::Kappa, dir.path()).unwrap();
    assert_eq!(m.members.len(), 3);
    let v: serde_json::Value = serde_json::from_slice(&read(dir.path(), "sweep_summary.json")).unwrap();
    assert_eq!(v["summary"]["members"].as_array().unwrap().len(), 3);
    assert_eq!(verify(dir.path()).unwrap().directories, 4);
}

#[test]
fn single_member_sweep_is_a_simulation() {
    let mut c = small();
    c.model.kappa = 0.3;
    c.sweep.kappas = vec![0.3];
    let (s, d) = (tempdir().unwrap(), tempdir().unwrap());
    let m = sweep(&c, SweepKind::Kappa, s.path()).unwrap();
    simulate(&c, d.path()).unwrap();
    assert!(m.all_passed());
    assert_eq!(
        read(&s.path().join("member_00"), "trajectory.csv"),
        read(d.path(), "trajectory.csv")
    );
    let v: serde_json::Value = serde_json::from_slice(&read(s.path(), "sweep_summary.json")).unwrap();
    assert!(v["summary"]["rate_checks"].as_array().unwrap().is_empty());
}

#[test]
fn eps_sweep_writes_reference() {
    let mut c = small();
    c.sweep.eps = vec![0.1, 0.05];
    let dir = tempdir().unwrap();
    let m = sweep(&c, SweepKind::Eps, dir.path()).unwrap();
    assert_eq!(m.members, ["member_00", "member_01", "reference"]);
    verify(dir.path()).unwrap();
}

#[test]
fn failed_run_dumps_last_state() {
    let mut c = small();
    c.time.cfl = 1e-30;
    let dir = tempdir().unwrap();
    assert!(simulate(&c, dir.path()).is_err());
    assert!(dir.path().join("last_state.csv").is_file());
    let err = verify(dir.path()).unwrap_err();
    assert!(err.to_string().contains("status"), "{err}");
}

#[test]
fn failing_members_produce_partial_manifest() {
    let mut c = small();
    c.time.cfl = 1e-30;
    c.sweep.kappas = vec![0.5, 0.2];
    let dir = tempdir().unwrap();
    assert!(sweep(&c, SweepKind::Kappa, dir.path()).is_err());
    let m: tumorlim_cli::RunManifest = serde_json::from_slice(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(m.status, Status::Partial);
    assert_eq!(m.failed_members.len(), 2);
    assert!(m.members.is_empty());
}

#[test]
fn binary_round_trips_defaults() {
    let exe = env!("CARGO_BIN_EXE_tumorlim");
    let out = Command::new(exe).arg("emit-defaults").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(Config::parse(&text, "stdout").unwrap().hash(), Config::default().hash());

    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, small().to_toml()).unwrap();
    let run_dir = dir.path().join("run");
    let status = Command::new(exe)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(Command::new(exe)
        .arg("verify")
        .arg("--dir")
        .arg(&run_dir)
        .status()
        .unwrap()
        .success());
    assert!(!Command::new(exe)
        .arg("verify")
        .arg("--dir")
        .arg(dir.path())
        .status()
        .unwrap()
        .success());

    std::fs::write(&cfg, "[model]\nkappa = -1\n").unwrap();
    let out = Command::new(exe)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));
}
