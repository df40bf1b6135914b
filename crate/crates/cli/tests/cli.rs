use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tvflow::io::{load_snapshot, OUTPUT_ENV};

fn tvflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvflow"))
        .args(args)
        .current_dir(dir)
        .env_remove(OUTPUT_ENV)
        .output()
        .expect("spawn tvflow")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const ZERO: &str = "nx = 8\nny = 8\nfinal_time = 0.03\ntau = 0.01\nu0 = constant 0\noutput = out\n";

const DISK: &str = "\
nx = 16
ny = 16
final_time = 0.04
tau = 0.01
u0 = disk 0.5 0.5 0.25 1
inner_gap_tol = 1e-8
output = out
";

#[test]
fn decay_prints_worked_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let o = tvflow(
        dir.path(),
        &["decay", "--N", "2", "--r0", "1.5", "--r", "1.2"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "h0=2 h1=1 C=1.2");
}

#[test]
fn inadmissible_decay_triple_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tvflow(
        dir.path(),
        &["decay", "--N", "2", "--r0", "1.2", "--r", "1.5"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_bad_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tvflow(dir.path(), &["frobnicate"]).status.code(), Some(2));
    fs::write(dir.path().join("bad.cfg"), format!("{ZERO}colour = red\n")).unwrap();
    let o = tvflow(dir.path(), &["solve", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn solve_on_zero_data_writes_zero_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("zero.cfg"), ZERO).unwrap();
    let o = tvflow(dir.path(), &["solve", "--config", "zero.cfg"]);
    assert_eq!(o.status.code(), Some(0));
    let out = dir.path().join("out");
    let index = fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 4);
    for m in 0..4 {
        let s = load_snapshot(&out.join(format!("u_{m:05}.tvf"))).unwrap();
        assert_eq!((s.nx, s.ny), (8, 8));
        assert!(s.values.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn output_directory_follows_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("zero.cfg"), ZERO).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tvflow"))
        .args(["solve", "--config", "zero.cfg"])
        .current_dir(dir.path())
        .env(OUTPUT_ENV, "elsewhere")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("elsewhere/index.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn contraction_on_equal_data_passes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("disk.cfg"), DISK).unwrap();
    let o = tvflow(
        dir.path(),
        &["theorems", "--config", "disk.cfg", "--only", "contraction"],
    );
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 1);
    assert!(s.starts_with("PASS contraction"));
    assert!(dir.path().join("out/contraction.csv").exists());
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("disk.cfg"), DISK).unwrap();
    let o = tvflow(
        dir.path(),
        &["theorems", "--config", "disk.cfg", "--only", "oracle"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_then_verify_emits_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("disk.cfg"), DISK).unwrap();
    assert_eq!(
        tvflow(dir.path(), &["solve", "--config", "disk.cfg"])
            .status
            .code(),
        Some(0)
    );
    let o = tvflow(
        dir.path(),
        &["verify", "--config", "disk.cfg", "--csv", "report.csv"],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    // header comment, column names, then 4 steps at 3 levels
    assert_eq!(csv.lines().count(), 2 + 4 * 3);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("PASS verify"));
}

#[test]
fn verify_without_trajectory_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("disk.cfg"), DISK).unwrap();
    let o = tvflow(dir.path(), &["verify", "--config", "disk.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("load failed"));
}
