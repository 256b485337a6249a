use ndc_core::exec::Exec;
use ndc_core::reproduce::{canned, reproduce, Target, CANNED};
use ndc_core::scenario::{run_json, RunError, RunOptions, Scenario};

const SMALL: &str = r#"{
  "name": "small",
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
  "arm1": [ { "kind": "custom", "name": "spool", "gdd_s2": 5e-24 } ],
  "arm2": [ { "kind": "vacuum" } ],
  "irf_fwhm_s": 100e-12,
  "tcspc": { "total_counts": 50000, "bin_width_s": 16e-12 },
  "seed": 5
}"#;

fn issues(text: &str) -> Vec<String> {
    match run_json(text, &RunOptions::default()) {
        Err(RunError::Invalid(issues)) => issues.into_iter().map(|i| i.path).collect(),
        other => panic!("expected invalid input, got {other:?}"),
    }
}

#[test]
fn small_scenario_writes_curves_and_fit() {
    let out = run_json(SMALL, &RunOptions::default()).unwrap();
    assert!(out.passed());
    let g2 = out.file("g2.csv").unwrap();
    assert!(g2.starts_with("tau_s,value\n"));
    assert_eq!(g2.lines().count(), 1 + 501);
    assert!(out.file("tcspc.csv").unwrap().starts_with("bin_start_s,counts\n"));
    let fit = out.file("fit.txt").unwrap();
    for key in ["fwhm_s=", "center_s=", "uncertainty_s=", "converged="] {
        assert!(fit.contains(key));
    }
    assert!(out.file("manifest.json").is_some());
}

#[test]
fn seed_override_changes_only_the_counts() {
    let a = run_json(SMALL, &RunOptions::default()).unwrap();
    let b = run_json(SMALL, &RunOptions { seed: Some(6), ..RunOptions::default() }).unwrap();
    assert_eq!(a.file("g2.csv"), b.file("g2.csv"));
    assert_ne!(a.file("tcspc.csv"), b.file("tcspc.csv"));
}

#[test]
fn outputs_do_not_depend_on_execution_strategy() {
    let runs: Vec<_> = Exec::all()
        .iter()
        .map(|&exec| run_json(SMALL, &RunOptions { exec, ..RunOptions::default() }).unwrap().files)
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.len(), runs[0].len());
        for ((name, a), (_, b)) in runs[0].iter().zip(r) {
            if name == "manifest.json" {
                let differing: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
                assert!(differing.iter().all(|(x, _)| x.contains("\"exec\"")), "{differing:?}");
            } else {
                assert_eq!(a, b, "{name}");
            }
        }
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let text = SMALL.replace("\"seed\": 5", "\"seed\": 5, \"colour\": 1");
    assert!(!issues(&text).is_empty());
}

#[test]
fn invalid_values_are_reported_with_paths() {
    let text = SMALL
        .replace("\"points\": 4096", "\"points\": 3000")
        .replace("\"step_s\": 8e-12", "\"step_s\": -8e-12");
    let paths = issues(&text);
    assert!(paths.iter().any(|p| p.starts_with("grid")), "{paths:?}");
    assert!(paths.iter().any(|p| p.starts_with("delays")), "{paths:?}");
}

#[test]
fn grid_point_override_is_validated() {
    match run_json(SMALL, &RunOptions { grid_points: Some(100), ..RunOptions::default() }) {
        Err(RunError::Invalid(issues)) => assert!(issues.iter().any(|i| i.path == "--grid-points")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn short_delay_window_is_rejected() {
    let text = SMALL
        .replace("\"start_s\": -2e-9", "\"start_s\": -0.2e-9")
        .replace("\"stop_s\": 2e-9", "\"stop_s\": 0.2e-9");
    assert!(matches!(run_json(&text, &RunOptions::default()), Err(RunError::Compute(_))));
}

#[test]
fn canned_scenarios_parse() {
    for (name, text) in CANNED {
        let s = Scenario::from_json(text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert!(s.validate().is_empty(), "{name}");
    }
    assert!(canned("fig5").is_none());
}

#[test]
fn fig3_reproduction_passes() {
    let r = reproduce(Target::Fig3, &RunOptions::default()).unwrap();
    assert!(r.passed(), "{}", r.text);
    assert!(r.files.iter().any(|(n, _)| n == "fig3b/fit.txt"));
}
