//! Canned scenarios and the per-figure pass/fail reports behind `ndcsim reproduce`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::dispersion::{fiber_gdd_from_measured_width, grating_pair_gdd, GratingPair};
use crate::quantum::{fwhm_broadened, ndc_reduction};
use crate::report::{check_lines, key_values, Check};
use crate::scenario::{run_json, RunError, RunOptions, RunOutput};
use crate::spectral::{conjugate_wavelength, match_gamma, PhaseMatching, PumpSpec};
use crate::Error;

pub const CANNED: &[(&str, &str)] = &[
    ("fig3a", include_str!("../scenarios/fig3a.json")),
    ("fig3b", include_str!("../scenarios/fig3b.json")),
    ("fig4", include_str!("../scenarios/fig4.json")),
    ("fig6", include_str!("../scenarios/fig6.json")),
];

pub fn canned(name: &str) -> Option<&'static str> {
    CANNED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Values quoted for the experiment that the reproductions are held against.
pub mod reference {
    pub const PUMP_WAVELENGTH: f64 = 408.2e-9;
    pub const SIGNAL_WAVELENGTH: f64 = 896e-9;
    pub const IDLER_WAVELENGTH: f64 = 749.8e-9;
    pub const CRYSTAL_LENGTH: f64 = 3e-3;
    pub const WALKOFF: f64 = 88.9e-15;
    pub const GAMMA: f64 = 0.04822;
    pub const GROOVE_SPACING: f64 = 1e-3 / 2400.0;
    pub const GRATING_SEPARATION: f64 = 0.1;
    pub const DIFFRACTED_ANGLE_DEG: f64 = 60.45;
    pub const GRATING_WAVELENGTH: f64 = 750e-9;
    /// −(2.03 ps)²
    pub const GRATING_GDD: f64 = -(2.03e-12 * 2.03e-12);
    /// −(1.41 ps)²
    pub const GRATING_GDD_SINGLE_PASS: f64 = -(1.41e-12 * 1.41e-12);
    pub const NDC_REDUCTION: f64 = 496e-12;
    pub const FIBER_WIDTH: f64 = 3.861e-9;
    pub const FIBER_WIDTH_DECONVOLVED: f64 = 3.785e-9;
    pub const FIBER_GDD: f64 = 3.20e-23;
    pub const FIBER_GDD_DECONVOLVED: f64 = 3.14e-23;
    pub const GRATING_WIDTH: f64 = 2.436e-9;
    pub const MEASURED_SPACING_REDUCTION: f64 = 478e-12;
    pub const TRANSFORM_LIMITED_FWHM: f64 = 46.0e-15;
    pub const IRF_FWHM: f64 = 762e-12;
}

pub fn reference_phase_matching() -> Result<PhaseMatching, Error> {
    use reference::*;
    PhaseMatching::from_wavelengths(
        CRYSTAL_LENGTH,
        WALKOFF / CRYSTAL_LENGTH,
        PumpSpec::new(PUMP_WAVELENGTH)?,
        SIGNAL_WAVELENGTH,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Fig3,
    Fig4,
    Fig6,
    TableDerived,
    All,
}

impl Target {
    pub const NAMES: [&'static str; 5] = ["fig3", "fig4", "fig6", "table-derived", "all"];

    pub fn name(self) -> &'static str {
        match self {
            Target::Fig3 => "fig3",
            Target::Fig4 => "fig4",
            Target::Fig6 => "fig6",
            Target::TableDerived => "table-derived",
            Target::All => "all",
        }
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig3" => Ok(Target::Fig3),
            "fig4" => Ok(Target::Fig4),
            "fig6" => Ok(Target::Fig6),
            "table-derived" => Ok(Target::TableDerived),
            "all" => Ok(Target::All),
            other => Err(format!("unknown target {other:?}; expected one of {}", Target::NAMES.join(", "))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceReport {
    pub checks: Vec<Check>,
    /// Paths relative to the output directory.
    pub files: Vec<(String, String)>,
    pub text: String,
}

impl ReproduceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn run_canned(name: &str, opts: &RunOptions, files: &mut Vec<(String, String)>) -> Result<RunOutput, RunError> {
    let text = canned(name).expect("bundled scenario");
    let out = run_json(text, opts)?;
    files.extend(out.files.iter().map(|(n, c)| (format!("{name}/{n}"), c.clone())));
    Ok(out)
}

fn value(out: &RunOutput, key: &str) -> f64 {
    out.value(key).unwrap_or(f64::NAN)
}

fn flag(out: &RunOutput, key: &str) -> bool {
    out.flags.get(key).copied().unwrap_or(false)
}

fn ps(v: f64) -> String {
    format!("{:.1} ps", v * 1e12)
}

fn ns(v: f64) -> String {
    format!("{:.4} ns", v * 1e9)
}

fn fig3(opts: &RunOptions, files: &mut Vec<(String, String)>, text: &mut String) -> Result<Vec<Check>, RunError> {
    use reference::*;
    let a = run_canned("fig3a", opts, files)?;
    let b = run_canned("fig3b", opts, files)?;
    let _ = writeln!(text, "fig3a fiber only");
    let _ = writeln!(text, "  B arm1            {:e} s^2", value(&a, "b_arm1_s2"));
    let _ = writeln!(text, "  predicted (irf)   {}", ns(value(&a, "predicted_fwhm_with_irf_s")));
    let _ = writeln!(text, "  fitted            {}", ns(value(&a, "fit_fwhm_s")));
    let _ = writeln!(text, "  tcspc fitted      {}", ns(value(&a, "tcspc_fit_fwhm_s")));
    let _ = writeln!(text, "fig3b grating engaged");
    let _ = writeln!(text, "  B total           {:e} s^2", value(&b, "b_total_s2"));
    let _ = writeln!(text, "  fiber-only fit    {}", ns(value(&b, "baseline_fit_fwhm_s")));
    let _ = writeln!(text, "  unclipped fit     {}", ns(value(&b, "unclipped_fit_fwhm_s")));
    let _ = writeln!(text, "  clipped fit       {}", ns(value(&b, "fit_fwhm_s")));
    let _ = writeln!(text, "  tcspc fitted      {}", ns(value(&b, "tcspc_fit_fwhm_s")));
    let _ = writeln!(text, "  clip passband     {:.3} nm", value(&b, "clip_passband_fwhm_m") * 1e9);
    let _ = writeln!(text, "  predicted drop    {}", ps(value(&b, "predicted_drop_s")));
    let _ = writeln!(text, "  ndc share         {}", ps(value(&b, "ndc_share_s")));
    let _ = writeln!(text, "  clipping share    {}", ps(value(&b, "clipping_share_s")));
    Ok(vec![
        Check::within_rel("fig3a fitted FWHM", value(&a, "fit_fwhm_s"), FIBER_WIDTH, 0.01),
        Check::within_range("fig3b predicted drop without clipping", value(&b, "predicted_drop_s"), 0.49e-9, 0.50e-9),
        Check::within_rel("fig3b fitted FWHM with clipping", value(&b, "fit_fwhm_s"), GRATING_WIDTH, 0.05),
        Check::within_range("fig3b NDC share", value(&b, "ndc_share_s"), MEASURED_SPACING_REDUCTION, NDC_REDUCTION),
    ])
}

fn fig4(opts: &RunOptions, files: &mut Vec<(String, String)>, text: &mut String) -> Result<Vec<Check>, RunError> {
    let out = run_canned("fig4", opts, files)?;
    let _ = writeln!(text, "fig4 slice peaks, fiber only");
    text.push_str(out.file("slices_baseline.csv").unwrap_or(""));
    let _ = writeln!(text, "fig4 slice peaks, grating engaged");
    text.push_str(out.file("slices.csv").unwrap_or(""));
    let _ = writeln!(text, "fig4 adjacent pairs");
    text.push_str(out.file("slice_pairs.csv").unwrap_or(""));
    let reduction = value(&out, "slice_spacing_reduction_s");
    let _ = writeln!(text, "  740-760 nm spacing, fiber only  {}", ns(value(&out, "baseline_slice_spacing_s")));
    let _ = writeln!(text, "  740-760 nm spacing, grating     {}", ns(value(&out, "slice_spacing_s")));
    let _ = writeln!(text, "  reduction                       {}", ps(reduction));
    let _ = writeln!(text, "  chirp-rate estimate             {}", ps(value(&out, "slice_predicted_reduction_s")));
    let pm = reference_phase_matching()?;
    let eq8 = ndc_reduction(&pm, reference::GAMMA, reference::GRATING_GDD)?;
    let _ = writeln!(text, "  linear-budget estimate          {}", ps(eq8));
    Ok(vec![
        Check::new(
            "fig4 740-760 nm spacing strictly reduced",
            reduction > 0.0,
            format!("reduction {}", ps(reduction)),
        ),
        Check::within_range("fig4 spacing reduction", reduction, 450e-12, 560e-12),
        Check::new(
            "fig4 every adjacent pair reduced",
            flag(&out, "slice_pairs_all_reduced"),
            format!(
                "{} of {} pairs",
                value(&out, "slice_pairs_reduced"),
                value(&out, "slice_pairs_total")
            ),
        ),
        Check::within_range("fig4 slope, fiber only", value(&out, "baseline_slice_slope_rel_err"), 0.0, 0.02),
        Check::within_range("fig4 slope, grating engaged", value(&out, "slice_slope_rel_err"), 0.0, 0.02),
    ])
}

fn fig6(opts: &RunOptions, files: &mut Vec<(String, String)>, text: &mut String) -> Result<Vec<Check>, RunError> {
    let out = run_canned("fig6", opts, files)?;
    let _ = writeln!(text, "fig6 mixture cases");
    text.push_str(out.file("mixture.csv").unwrap_or(""));
    let _ = writeln!(text, "fig6 mixture sweep");
    text.push_str(out.file("mixture_sweep.csv").unwrap_or(""));
    let _ = writeln!(text, "fig6 quantum/classical contrast (+B, -B)");
    text.push_str(out.file("contrast.csv").unwrap_or(""));
    let _ = writeln!(text, "  zero-dispersion quantum FWHM  {:.2} fs", value(&out, "quantum_tl_fwhm_s") * 1e15);
    Ok(vec![
        Check::new(
            "fig6 mixture ordering",
            flag(&out, "mixture_ordered"),
            format!(
                "delta tau {:e} > {:e} > {:e} s",
                value(&out, "mixture_pp_delta_tau_s"),
                value(&out, "mixture_pz_delta_tau_s"),
                value(&out, "mixture_pm_delta_tau_s")
            ),
        ),
        Check::new(
            "fig6 mixture ordering across sweep",
            flag(&out, "mixture_sweep_ordered"),
            "see mixture_sweep.csv",
        ),
        Check::new(
            "fig6 (+b,-b) envelope above the single-pair floor",
            flag(&out, "mixture_pm_above_floor") && flag(&out, "mixture_sweep_above_floor"),
            format!(
                "fwhm {:e} s, floor {:e} s",
                value(&out, "mixture_pm_fwhm_s"),
                value(&out, "mixture_pm_floor_fwhm_s")
            ),
        ),
        Check::within_range(
            "fig6 quantum (+B,-B) width equals zero-dispersion width",
            value(&out, "contrast_max_quantum_rel_err"),
            0.0,
            0.01,
        ),
        Check::within_range(
            "fig6 classical pair width at least 10x wider",
            value(&out, "contrast_min_classical_ratio"),
            10.0,
            f64::INFINITY,
        ),
        Check::within_range("fig6 mixed-state flatness", value(&out, "mixed_state_flatness_max"), 0.0, 1e-9),
    ])
}

fn table_derived(files: &mut Vec<(String, String)>, text: &mut String) -> Result<Vec<Check>, RunError> {
    use reference::*;
    let pm = reference_phase_matching()?;
    let gp = GratingPair::new(GROOVE_SPACING, GRATING_SEPARATION, DIFFRACTED_ANGLE_DEG.to_radians(), 2)?;
    let double = grating_pair_gdd(&gp, GRATING_WAVELENGTH)?;
    let single = grating_pair_gdd(&gp.with_passes(1)?, GRATING_WAVELENGTH)?;
    let reduction = ndc_reduction(&pm, GAMMA, GRATING_GDD)?;
    let reduction_geometry = ndc_reduction(&pm, GAMMA, double)?;
    let fiber = fiber_gdd_from_measured_width(FIBER_WIDTH, &pm, GAMMA)?;
    let fiber_dec = fiber_gdd_from_measured_width(FIBER_WIDTH_DECONVOLVED, &pm, GAMMA)?;
    let gamma = match_gamma();
    let idler = conjugate_wavelength(SIGNAL_WAVELENGTH, PumpSpec::new(PUMP_WAVELENGTH)?)?;
    let tl = fwhm_broadened(&pm, GAMMA, 0.0)?.fwhm;
    let kv = key_values([
        ("grating_gdd_double_pass_s2", format!("{double:e}")),
        ("grating_gdd_double_pass_sqrt_s", format!("{:e}", (-double).sqrt())),
        ("grating_gdd_single_pass_s2", format!("{single:e}")),
        ("grating_gdd_single_pass_sqrt_s", format!("{:e}", (-single).sqrt())),
        ("grating_gdd_quoted_s2", format!("{GRATING_GDD:e}")),
        ("ndc_reduction_quoted_gdd_s", format!("{reduction:e}")),
        ("ndc_reduction_geometry_gdd_s", format!("{reduction_geometry:e}")),
        ("fiber_gdd_from_3861ps_s2", format!("{:e}", fiber.gdd)),
        ("fiber_gdd_from_3785ps_s2", format!("{:e}", fiber_dec.gdd)),
        ("matched_gamma", format!("{gamma:e}")),
        ("idler_wavelength_m", format!("{idler:e}")),
        ("zero_dispersion_fwhm_s", format!("{tl:e}")),
        ("walkoff_s", format!("{:e}", pm.walkoff())),
    ]);
    text.push_str("table-derived\n");
    for line in kv.lines() {
        let _ = writeln!(text, "  {line}");
    }
    files.push(("table_derived.txt".into(), kv));
    Ok(vec![
        Check::within_rel("grating GDD double pass vs -(2.03 ps)^2", double, GRATING_GDD, 0.04),
        Check::within_rel("grating GDD single pass vs -(1.41 ps)^2", single, GRATING_GDD_SINGLE_PASS, 0.01),
        Check::within_rel("NDC reduction for (2.03 ps)^2", reduction, NDC_REDUCTION, 0.01),
        Check::within_rel("fiber GDD from 3.861 ns", fiber.gdd, FIBER_GDD, 0.01),
        Check::within_rel("fiber GDD from 3.785 ns", fiber_dec.gdd, FIBER_GDD_DECONVOLVED, 0.01),
        Check::within_rel("matched gamma", gamma, GAMMA, 3e-4),
        Check::within_rel("conjugate idler wavelength", idler, IDLER_WAVELENGTH, 1e-4),
        Check::within_rel("zero-dispersion FWHM", tl, TRANSFORM_LIMITED_FWHM, 0.01),
    ])
}

/// Runs the canned scenarios of `target` and checks them against the quoted values.
pub fn reproduce(target: Target, opts: &RunOptions) -> Result<ReproduceReport, RunError> {
    let mut files = Vec::new();
    let mut text = String::new();
    let mut checks = Vec::new();
    let parts: &[Target] = match target {
        Target::All => &[Target::Fig3, Target::Fig4, Target::Fig6, Target::TableDerived],
        _ => std::slice::from_ref(&target),
    };
    for part in parts {
        checks.extend(match part {
            Target::Fig3 => fig3(opts, &mut files, &mut text)?,
            Target::Fig4 => fig4(opts, &mut files, &mut text)?,
            Target::Fig6 => fig6(opts, &mut files, &mut text)?,
            Target::TableDerived => table_derived(&mut files, &mut text)?,
            Target::All => unreachable!(),
        });
    }
    text.push('\n');
    text.push_str(&check_lines(&checks));
    files.push((format!("{}_report.txt", target.name()), text.clone()));
    Ok(ReproduceReport { checks, files, text })
}
