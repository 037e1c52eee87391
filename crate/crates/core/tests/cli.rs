//! End-to-end runs of the `npns` binary.

use std::process::Command;

use npns::scenario::io::read_timeseries;
use npns::scenario::load_snapshot;

const SMALL: &str = r#"
boundary_regime = "blocking"
[grid]
nx = 12
ny = 12
[params]
eps = 0.05
[[species]]
z = 1
d = 1
regime = "blocking"
initial = "1 + 0.3*gaussian(0.4, 0.5, 0.15)"
[[species]]
z = -1
d = 1
regime = "blocking"
initial = "1 + 0.3*gaussian(0.6, 0.5, 0.15)"
[boundary]
bottom = 0.0
top = 0.2
left = "0.2*y"
right = "0.2*y"
[run]
t_end = 0.1
dt_max = 5e-3
output_every = 2
snapshot_every = 10
"#;

fn npns() -> Command {
    Command::new(env!("CARGO_BIN_EXE_npns"))
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = npns()
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--check-properties"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("[PASS] mass conservation"), "{stdout}");
    let rows = read_timeseries(std::fs::File::open(out.join("timeseries.csv")).unwrap()).unwrap();
    assert!(rows.len() >= 5);
    assert!((rows.last().unwrap().t - 0.1).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[1].total_energy <= w[0].total_energy + 1e-12));
    let fin = load_snapshot(&out.join("snapshots/final.npns")).unwrap();
    assert_eq!(fin.c.len(), 2);
    assert!((fin.t - 0.1).abs() < 1e-12);
    assert!(out.join("snapshots/step_0000010.npns").exists());
    assert!(out.join("boltzmann.npns").exists());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("positivity"));
}

#[test]
fn pb_reports_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = npns()
        .args(["pb", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let state = load_snapshot(&dir.path().join("boltzmann.npns")).unwrap();
    assert!(state.flow.velocity.max_abs() == 0.0);
    assert!(state.c.iter().all(|c| c.min() > 0.0));
}

#[test]
fn pb1d_prints_profile() {
    let out = npns()
        .args(["pb1d", "--eps", "0.1", "--height", "1", "--w", "1", "--species", "1:1,-1:1", "--samples", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "y,phi");
    assert_eq!(lines.len(), 6);
    let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-15 && (last[1] - 1.0).abs() < 1e-12);
}

#[test]
fn errors_exit_with_code_two() {
    let out = npns().args(["verify", "no-such-preset"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = npns()
        .args(["pb1d", "--eps", "0.1", "--height", "1", "--w", "1", "--species", "1:1,-1:2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("neutrality"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, SMALL.replace("eps = 0.05", "eps = 0.05\nunknown = 1")).unwrap();
    let out = npns().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
