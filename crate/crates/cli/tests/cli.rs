use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn damplast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damplast")).args(args).output().expect("binary runs")
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

#[test]
fn run_writes_timeseries_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = damplast(&["run", scenario("tiny_bar.cfg").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let ts = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 1 + 4);
    for k in 0..=3 {
        for field in ["u", "chi", "d"] {
            assert!(dir.path().join(format!("snapshots/step_{k:05}_{field}.csv")).exists());
        }
    }
}

#[test]
fn verify_accepts_a_stored_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("activation.cfg");
    let cfg = cfg.to_str().unwrap();
    let run = damplast(&["run", cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", text(&run));
    let report_dir = dir.path().join("report");
    let out = damplast(&["verify", cfg, "--trajectory", dir.path().to_str().unwrap(), "--out", report_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(report_dir.join("report.csv").exists());
    assert!(report_dir.join("report.txt").exists());
}

#[test]
fn verify_flags_injected_damage_increase() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("tiny_bar.cfg");
    let cfg = cfg.to_str().unwrap();
    let run = damplast(&["run", cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", text(&run));

    // lowering χ at step 1 makes step 2 heal
    let path = dir.path().join("snapshots/step_00001_chi.csv");
    let original = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = original.lines().map(str::to_owned).collect();
    let mut cols: Vec<String> = lines[2].split(',').map(str::to_owned).collect();
    cols[2] = format!("{:.16e}", 0.25);
    lines[2] = cols.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let out = damplast(&["verify", cfg, "--trajectory", dir.path().to_str().unwrap()]);
    let all = text(&out);
    assert_eq!(out.status.code(), Some(3), "{all}");
    assert!(all.contains("step 2"), "{all}");
    assert!(all.contains("damage increased"), "{all}");
}

#[test]
fn oracle_agrees_on_tiny_bar() {
    let out = damplast(&["oracle", scenario("tiny_bar.cfg").to_str().unwrap(), "--step", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
}

#[test]
fn oracle_refuses_oversized_instance() {
    let out = damplast(&["oracle", scenario("plate_2d.cfg").to_str().unwrap(), "--step", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("too large"));
}

#[test]
fn invalid_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "[mesh]\ndim = 4\n").unwrap();
    let out = damplast(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let missing = damplast(&["run", dir.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn unreadable_trajectory_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = damplast(&["verify", scenario("tiny_bar.cfg").to_str().unwrap(), "--trajectory", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_conditions_passes_on_plate() {
    let out = damplast(&["check-conditions", scenario("plate_2d.cfg").to_str().unwrap(), "--samples", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
}

#[test]
fn verify_serializes_the_violating_competitor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("activation.cfg");
    let cfg = cfg.to_str().unwrap();
    let run = damplast(&["run", cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", text(&run));

    // an off-equilibrium displacement is beaten by the elastic re-solve
    let path = dir.path().join("snapshots/step_00005_u.csv");
    let original = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = original.lines().map(str::to_owned).collect();
    let mut cols: Vec<String> = lines[2].split(',').map(str::to_owned).collect();
    let u: f64 = cols[2].parse().unwrap();
    cols[2] = format!("{:.16e}", u + 0.5);
    lines[2] = cols.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let report = dir.path().join("report");
    let out = damplast(&["verify", cfg, "--trajectory", dir.path().to_str().unwrap(), "--out", report.to_str().unwrap()]);
    let all = text(&out);
    assert_eq!(out.status.code(), Some(3), "{all}");
    assert!(all.contains("step 5: stability margin"), "{all}");
    assert!(report.join("competitors/snapshots/step_00005_u.csv").exists());
    assert!(!report.join("competitors/snapshots/step_00004_u.csv").exists());
}
