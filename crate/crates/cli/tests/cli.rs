use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = r#"{
  "name": "cli",
  "source": {
    "pump_wavelength_m": 408.2e-9,
    "signal_wavelength_m": 896e-9,
    "crystal_length_m": 3e-3,
    "inverse_group_velocity_difference_s_per_m": 2.963333333333334e-11,
    "model": "gaussian",
    "gamma": 0.04822
  },
  "grid": { "points": 4096 },
  "delays": { "start_s": -2e-9, "stop_s": 2e-9, "step_s": 8e-12 },
  "arm1": [ { "kind": "fiber", "gdd_s2": 5e-24 } ],
  "arm2": [],
  "irf_fwhm_s": 100e-12,
  "tcspc": { "total_counts": 50000, "bin_width_s": 16e-12 },
  "expect": { "fit_fwhm_s": { "value": EXPECTED, "rel_tol": 0.01 } },
  "seed": 11
}"#;

fn ndcsim(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndcsim"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .output()
        .unwrap()
}

fn scenario(dir: &Path, expected: f64) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, SCENARIO.replace("EXPECTED", &format!("{expected:e}"))).unwrap();
    path.display().to_string()
}

fn entries(dir: &Path) -> usize {
    fs::read_dir(dir).map(|d| d.count()).unwrap_or(0)
}

/// FWHM of the Gaussian-model correlation at GDD 5e-24 s² with a 100 ps IRF.
fn expected_fit() -> f64 {
    let a = 0.04822 * (88.9e-15f64).powi(2);
    let b = 5e-24f64;
    let g2 = 2.0 * (2.0 * 2f64.ln()).sqrt() * (a + b * b / a).sqrt();
    (g2 * g2 + 100e-12 * 100e-12).sqrt()
}

#[test]
fn run_succeeds_and_writes_outputs() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let file = scenario(work.path(), expected_fit());
    let o = ndcsim(&out, &["run", &file]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let g2 = fs::read_to_string(out.join("g2.csv")).unwrap();
    assert!(g2.starts_with("tau_s,value\n"));
    let hist = fs::read_to_string(out.join("tcspc.csv")).unwrap();
    assert!(hist.starts_with("bin_start_s,counts\n"));
    let fit = fs::read_to_string(out.join("fit.txt")).unwrap();
    assert!(fit.lines().any(|l| l.starts_with("fwhm_s=")));
    assert!(fit.contains("converged=true"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn mismatch_exits_one() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let file = scenario(work.path(), 2.0 * expected_fit());
    let o = ndcsim(&out, &["run", &file]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn malformed_scenario_exits_two_without_outputs() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let file = work.path().join("bad.json");
    fs::write(&file, "{ \"name\": \"bad\", ").unwrap();
    let o = ndcsim(&out, &["run", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err.is_object());
    assert_eq!(entries(&out), 0);
}

#[test]
fn invalid_values_exit_two_with_field_paths() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let file = scenario(work.path(), expected_fit());
    fs::write(&file, fs::read_to_string(&file).unwrap().replace("\"irf_fwhm_s\": 100e-12", "\"irf_fwhm_s\": -1")).unwrap();
    let o = ndcsim(&out, &["run", &file]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("irf_fwhm_s"));
    assert_eq!(entries(&out), 0);
}

#[test]
fn missing_file_and_unknown_target_exit_two() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    assert_eq!(ndcsim(&out, &["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
    assert_eq!(ndcsim(&out, &["reproduce", "fig9"]).status.code(), Some(2));
    assert_eq!(entries(&out), 0);
}

#[test]
fn grid_points_override_is_checked() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let file = scenario(work.path(), expected_fit());
    assert_eq!(ndcsim(&out, &["--grid-points", "1000", "run", &file]).status.code(), Some(2));
    assert_eq!(ndcsim(&out, &["--grid-points", "8192", "run", &file]).status.code(), Some(0));
}

#[test]
fn grating_calculator() {
    let work = tempfile::tempdir().unwrap();
    let o = ndcsim(
        work.path(),
        &["gdd", "grating", "--lambda", "750e-9", "--d", "4.166666666666667e-7", "--G", "0.1", "--theta", "60.45"],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let gdd: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("gdd_s2="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gdd < 0.0 && (gdd.abs().sqrt() - 2.0e-12).abs() < 0.05e-12);
    let bad = ndcsim(work.path(), &["gdd", "grating", "--lambda", "750e-9", "--d", "4.2e-7", "--G", "0.1", "--theta", "95"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn fiber_calculator() {
    let work = tempfile::tempdir().unwrap();
    let o = ndcsim(work.path(), &["gdd", "fiber-from-width", "--fwhm", "3.861e-9", "--irf", "762e-12"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let gdd: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("gdd_s2="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((gdd - 3.14e-23).abs() / 3.14e-23 < 0.01);
    let bad = ndcsim(work.path(), &["gdd", "fiber-from-width", "--fwhm", "500e-12", "--irf", "762e-12"]);
    assert_eq!(bad.status.code(), Some(2));
}
