//! Acceptance criteria 1-10, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ndc_core::classical::classical_fwhm;
use ndc_core::curve::DelayGrid;
use ndc_core::dispersion::{fiber_gdd_from_measured_width, DispersionBudget};
use ndc_core::quantum::{g2_closed_form, g2_mixed_state, g2_numeric, ndc_reduction, MixedSpectrum};
use ndc_core::report::Check;
use ndc_core::reproduce::{canned, reference, reference_phase_matching, reproduce, Target};
use ndc_core::scenario::{run_json, RunOptions};
use ndc_core::spectral::{gaussian_amplitude_fwhm, gaussian_jsa, DetuningGrid, PhaseMatching};

type Outcome = Result<Vec<Check>, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ndcsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ndcsim"))
}

fn key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn number(map: &BTreeMap<String, String>, key: &str) -> Result<f64, String> {
    map.get(key)
        .ok_or_else(|| format!("missing {key}"))?
        .parse()
        .map_err(|e| format!("{key}: {e}"))
}

fn pair_source() -> Result<PhaseMatching, String> {
    reference_phase_matching().map_err(|e| e.to_string())
}

fn grating_gdd() -> Outcome {
    let out = ndcsim()
        .args(["gdd", "grating", "--lambda", "750e-9", "--d", "4.166666666666667e-7", "--G", "0.1"])
        .args(["--theta", "60.45", "--passes", "2"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let kv = key_values(&String::from_utf8_lossy(&out.stdout));
    Ok(vec![
        Check::within_rel("double pass vs -(2.03 ps)^2", number(&kv, "gdd_s2")?, reference::GRATING_GDD, 0.04),
        Check::within_rel(
            "single pass vs -(1.41 ps)^2",
            number(&kv, "single_pass_gdd_s2")?,
            reference::GRATING_GDD_SINGLE_PASS,
            0.04,
        ),
    ])
}

fn ndc_magnitude() -> Outcome {
    let pm = pair_source()?;
    let r = ndc_reduction(&pm, reference::GAMMA, -(2.03e-12f64).powi(2)).map_err(|e| e.to_string())?;
    Ok(vec![Check::within_rel("reduction vs 496 ps", r, 496e-12, 0.01)])
}

fn fig3a_pipeline() -> Outcome {
    let pm = pair_source()?;
    let gdd = fiber_gdd_from_measured_width(3.785e-9, &pm, reference::GAMMA)
        .map_err(|e| e.to_string())?
        .gdd;
    let mut scenario: serde_json::Value = serde_json::from_str(canned("fig3a").ok_or("fig3a missing")?).map_err(|e| e.to_string())?;
    scenario["arm1"] = serde_json::json!([{ "kind": "fiber", "gdd_s2": gdd }]);
    let out = run_json(&scenario.to_string(), &RunOptions::default()).map_err(|e| e.to_json())?;
    let fit = out.value("fit_fwhm_s").ok_or("no fit")?;
    let tcspc = out.value("tcspc_fit_fwhm_s").ok_or("no tcspc fit")?;
    Ok(vec![
        Check::within_rel("fitted FWHM vs 3.861 ns", fit, 3.861e-9, 0.01),
        Check::within_rel("photon-counting fit vs 3.861 ns", tcspc, 3.861e-9, 0.01),
    ])
}

fn report_checks(target: Target) -> Outcome {
    Ok(reproduce(target, &RunOptions::default()).map_err(|e| e.to_json())?.checks)
}

fn fig3b_attribution() -> Outcome {
    Ok(report_checks(Target::Fig3)?.into_iter().filter(|c| c.name.starts_with("fig3b")).collect())
}

fn fig4_slices() -> Outcome {
    Ok(report_checks(Target::Fig4)?
        .into_iter()
        .filter(|c| !c.name.contains("slope"))
        .collect())
}

fn cancellation() -> Outcome {
    let pm = pair_source()?;
    let gamma = reference::GAMMA;
    let grid = DetuningGrid::covering(gaussian_amplitude_fwhm(&pm, gamma), 1 << 14).map_err(|e| e.to_string())?;
    let jsa = gaussian_jsa(&pm, gamma, &grid).map_err(|e| e.to_string())?;
    let delays = DelayGrid::centered(0.13e-15, 0.47e-15, 801).map_err(|e| e.to_string())?;
    let sigma0 = 1.0 / pm.gaussian_variance(gamma).sqrt();
    let mut checks = Vec::new();
    for b in [1e-24, 1e-23, 3.2e-23] {
        let (a1, a2) = (DispersionBudget::from_gdd(b), DispersionBudget::from_gdd(-b));
        let q = g2_numeric(&jsa, &a1, &a2, &delays)
            .and_then(|c| c.fwhm())
            .map_err(|e| e.to_string())?;
        let c = classical_fwhm(sigma0, b, -b).map_err(|e| e.to_string())?.fwhm;
        checks.push(Check::within_rel(format!("quantum (+B,-B) B={b:e} vs 46 fs"), q, 46e-15, 0.01));
        checks.push(Check::within_range(format!("classical/quantum B={b:e}"), c / q, 10.0, f64::INFINITY));
    }
    Ok(checks)
}

fn closed_form_oracle() -> Outcome {
    let pm = pair_source()?;
    let gamma = reference::GAMMA;
    let grid = DetuningGrid::covering(gaussian_amplitude_fwhm(&pm, gamma), 1 << 14).map_err(|e| e.to_string())?;
    let jsa = gaussian_jsa(&pm, gamma, &grid).map_err(|e| e.to_string())?;
    let mut checks = Vec::new();
    for b in [0.0, 1e-24, -1e-24, 1e-23, -1e-23, 3.2e-23, -3.2e-23] {
        let (a1, a2) = (DispersionBudget::from_gdd(b), DispersionBudget::zero());
        let cf = g2_closed_form(&pm, gamma, &a1, &a2).map_err(|e| e.to_string())?;
        let step = 8.0 * cf.fwhm() / 397.0;
        let delays = DelayGrid::centered(cf.peak_delay + 0.37 * step, step, 401).map_err(|e| e.to_string())?;
        let num = g2_numeric(&jsa, &a1, &a2, &delays)
            .and_then(|c| c.fwhm())
            .map_err(|e| e.to_string())?;
        checks.push(Check::within_rel(format!("FWHM at B={b:e}"), num, cf.fwhm(), 0.005));
    }
    Ok(checks)
}

fn mixed_state_flatness() -> Outcome {
    let spectrum = MixedSpectrum::gaussian(2e13, 201, 5.0).map_err(|e| e.to_string())?;
    let delays = DelayGrid::centered(0.0, 5e-12, 401).map_err(|e| e.to_string())?;
    let mut checks = Vec::new();
    for (b1, b2) in [(0.0, 0.0), (3.2e-23, 0.0), (3.2e-23, reference::GRATING_GDD), (1e-23, -1e-23), (1e-24, 1e-24)] {
        let r = g2_mixed_state(&spectrum, &DispersionBudget::from_gdd(b1), &DispersionBudget::from_gdd(b2), &delays)
            .map_err(|e| e.to_string())?;
        checks.push(Check::within_range(format!("flatness at ({b1:e}, {b2:e})"), r.flatness, 0.0, 1e-9));
    }
    Ok(checks)
}

fn mixture_ordering() -> Outcome {
    Ok(report_checks(Target::Fig6)?
        .into_iter()
        .filter(|c| c.name.contains("mixture") || c.name.contains("floor"))
        .collect())
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap_or_default());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = ndcsim()
            .arg("--out-dir")
            .arg(dir.path())
            .args(["--seed", "20070119", "reproduce", "all"])
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !status.success() {
            return Err(format!("reproduce all exited with {status}"));
        }
        runs.push(csv_files(dir.path()));
    }
    let identical = runs[0] == runs[1];
    Ok(vec![Check::new(
        "reproduce all, two runs",
        identical && !runs[0].is_empty(),
        format!("{} CSV files, byte-identical: {identical}", runs[0].len()),
    )])
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("grating GDD", grating_gdd),
        ("NDC magnitude", ndc_magnitude),
        ("fiber-only pipeline", fig3a_pipeline),
        ("grating attribution", fig3b_attribution),
        ("slice spacing", fig4_slices),
        ("cancellation invariant", cancellation),
        ("closed-form oracle", closed_form_oracle),
        ("mixed-state flatness", mixed_state_flatness),
        ("mixture ordering", mixture_ordering),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed().as_secs_f64();
        let (passed, details) = match &outcome {
            Ok(checks) if !checks.is_empty() => (checks.iter().all(|c| c.passed), checks.iter().map(Check::line).collect()),
            Ok(_) => (false, vec!["no checks ran".to_string()]),
            Err(e) => (false, vec![format!("error: {e}")]),
        };
        println!("{} criterion {}: {name} ({elapsed:.2} s)", if passed { "PASS" } else { "FAIL" }, i + 1);
        for d in details {
            println!("    {d}");
        }
        if !passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
