//! JSON scenario descriptors and the run pipeline behind `ndcsim run`.
//!
//! Field names carry their SI unit (`_m`, `_s`, `_s2`, `_rad_per_s`); there is
//! no unit inference. A run computes everything in memory and returns the
//! files to write, so a failing scenario never leaves partial output behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classical::{
    classical_fwhm, classical_joint_probability, mixture_case_widths, mixture_cases, mixture_histogram, MixtureSpec,
    PulseSpec,
};
use crate::curve::{CorrelationFunction, DelayGrid};
use crate::dispersion::{combine, fiber_gdd_from_measured_width, grating_pair_gdd, DispersionBudget, DispersiveElement, GratingPair};
use crate::exec::Exec;
use crate::measurement::{
    apply_filter, convolve_irf_with, deconvolve_quadrature, fit_gaussian_fwhm, simulate_tcspc, Arm, FilterShape,
    GaussianFit, InstrumentResponse, SliceSetup, SliceSweep, SpectralFilter,
};
use crate::quantum::{fwhm_broadened, g2_mixed_state, g2_numeric_with, total_gdd, G2Evaluation, G2Options, G2Route, MixedSpectrum};
use crate::report::{key_values, Check};
use crate::spectral::{
    angular_frequency, gaussian_amplitude_fwhm, gaussian_jsa, match_gamma, sinc_amplitude_fwhm, sinc_jsa, DetuningGrid,
    JointSpectralAmplitude, PhaseMatching, PumpSpec, DEFAULT_GRID_POINTS, MIN_GRID_POINTS,
};
use crate::{Error, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Free-form provenance notes, echoed into the manifest.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
    pub source: SourceSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub delays: Option<DelaySpec>,
    #[serde(default)]
    pub arm1: Vec<ElementSpec>,
    #[serde(default)]
    pub arm2: Vec<ElementSpec>,
    /// Alternative arm-2 configuration the main one is compared against.
    #[serde(default)]
    pub baseline_arm2: Option<Vec<ElementSpec>>,
    #[serde(default)]
    pub clipping: Option<ClippingSpec>,
    #[serde(default)]
    pub irf_fwhm_s: f64,
    #[serde(default)]
    pub tcspc: Option<TcspcSpec>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub slices: Option<SliceSpec>,
    #[serde(default)]
    pub classical: Option<ClassicalSpec>,
    #[serde(default)]
    pub mixture: Option<MixtureRunSpec>,
    /// Derived quantity name → expected value; a miss is a numeric mismatch.
    #[serde(default)]
    pub expect: BTreeMap<String, Expectation>,
    #[serde(default)]
    pub seed: u64,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::G2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    G2,
    Slices,
    Classical,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sinc,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub pump_wavelength_m: f64,
    pub signal_wavelength_m: f64,
    pub crystal_length_m: f64,
    pub inverse_group_velocity_difference_s_per_m: f64,
    pub model: ModelKind,
    /// Gaussian-model γ; the sinc-matched value when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Defaults to 8x the amplitude FWHM of the model.
    #[serde(default)]
    pub half_span_rad_per_s: Option<f64>,
}

fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            half_span_rad_per_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub start_s: f64,
    pub stop_s: f64,
    pub step_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    /// Either a GDD or a measured broadened width to invert.
    Fiber {
        #[serde(default)]
        gdd_s2: Option<f64>,
        #[serde(default)]
        measured_fwhm_s: Option<f64>,
        /// Instrument response removed from `measured_fwhm_s` in quadrature first.
        #[serde(default)]
        deconvolve_irf_fwhm_s: Option<f64>,
        #[serde(default)]
        delay_slope_s: f64,
    },
    GratingPair {
        groove_spacing_m: f64,
        separation_m: f64,
        diffracted_angle_deg: f64,
        #[serde(default = "default_passes")]
        passes: u8,
        wavelength_m: f64,
        /// Use this GDD instead of the geometry value (which is still reported).
        #[serde(default)]
        quoted_gdd_s2: Option<f64>,
        #[serde(default)]
        delay_slope_s: f64,
    },
    Custom {
        name: String,
        gdd_s2: f64,
        #[serde(default)]
        delay_slope_s: f64,
    },
    Vacuum,
}

fn default_passes() -> u8 {
    GratingPair::DEFAULT_PASSES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClippingSpec {
    pub arm: Arm,
    #[serde(default = "default_shape")]
    pub shape: FilterShape,
    /// Defaults to the arm's centre wavelength.
    #[serde(default)]
    pub center_wavelength_m: Option<f64>,
    #[serde(default)]
    pub passband_fwhm_m: Option<f64>,
    /// Choose the passband so the fitted FWHM of the measured curve hits this value.
    #[serde(default)]
    pub fit_to_fwhm_s: Option<f64>,
}

fn default_shape() -> FilterShape {
    FilterShape::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcspcSpec {
    pub total_counts: u64,
    pub bin_width_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub arm: Arm,
    pub wavelengths_m: Vec<f64>,
    pub passband_fwhm_m: f64,
    #[serde(default = "default_shape")]
    pub shape: FilterShape,
    #[serde(default)]
    pub apply_clipping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    /// σ₀; defaults to the bandwidth whose transform-limited pair width matches the quantum one.
    #[serde(default)]
    pub pulse_bandwidth_rad_per_s: Option<f64>,
    /// B values for the (+B, −B) quantum/classical contrast table.
    #[serde(default)]
    pub contrast_gdd_s2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureRunSpec {
    pub detuning_step_rad_per_s: f64,
    pub max_index: u32,
    pub envelope_sigma_rad_per_s: f64,
    #[serde(default)]
    pub pulse_bandwidth_rad_per_s: Option<f64>,
    pub beta_z_s2: f64,
    #[serde(default)]
    pub sweep_beta_z_s2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// One validation problem, addressed by a JSON-path-like location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// The scenario (or an override) is malformed or violates a precondition.
    Invalid(Vec<Issue>),
    Compute(Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(issues) => {
                for i in issues {
                    writeln!(f, "{}: {}", i.path, i.message)?;
                }
                Ok(())
            }
            RunError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Compute(e)
    }
}

impl RunError {
    /// Machine-readable issue list.
    pub fn to_json(&self) -> String {
        let issues = match self {
            RunError::Invalid(issues) => issues.clone(),
            RunError::Compute(e) => vec![Issue::new("$", e.to_string())],
        };
        serde_json::to_string_pretty(&json!({ "errors": issues })).unwrap_or_default()
    }
}

fn positive(issues: &mut Vec<Issue>, path: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        issues.push(Issue::new(path, format!("must be finite and > 0, got {v}")));
    }
}

fn finite(issues: &mut Vec<Issue>, path: &str, v: f64) {
    if !v.is_finite() {
        issues.push(Issue::new(path, format!("must be finite, got {v}")));
    }
}

fn validate_grid_points(issues: &mut Vec<Issue>, path: &str, n: usize) {
    if n < MIN_GRID_POINTS || !n.is_power_of_two() {
        issues.push(Issue::new(path, format!("must be a power of two >= {MIN_GRID_POINTS}, got {n}")));
    }
}

fn validate_elements(issues: &mut Vec<Issue>, arm: &str, elements: &[ElementSpec]) {
    for (i, e) in elements.iter().enumerate() {
        let p = |f: &str| format!("{arm}[{i}].{f}");
        match e {
            ElementSpec::Fiber {
                gdd_s2,
                measured_fwhm_s,
                deconvolve_irf_fwhm_s,
                delay_slope_s,
            } => {
                finite(issues, &p("delay_slope_s"), *delay_slope_s);
                match (gdd_s2, measured_fwhm_s) {
                    (Some(g), None) => finite(issues, &p("gdd_s2"), *g),
                    (None, Some(w)) => {
                        positive(issues, &p("measured_fwhm_s"), *w);
                        if let Some(irf) = deconvolve_irf_fwhm_s {
                            positive(issues, &p("deconvolve_irf_fwhm_s"), *irf);
                            if irf >= w {
                                issues.push(Issue::new(p("deconvolve_irf_fwhm_s"), "must be below measured_fwhm_s"));
                            }
                        }
                    }
                    _ => issues.push(Issue::new(p("gdd_s2"), "give exactly one of gdd_s2 or measured_fwhm_s")),
                }
                if gdd_s2.is_some() && deconvolve_irf_fwhm_s.is_some() {
                    issues.push(Issue::new(p("deconvolve_irf_fwhm_s"), "only applies with measured_fwhm_s"));
                }
            }
            ElementSpec::GratingPair {
                groove_spacing_m,
                separation_m,
                diffracted_angle_deg,
                passes,
                wavelength_m,
                quoted_gdd_s2,
                delay_slope_s,
            } => {
                positive(issues, &p("groove_spacing_m"), *groove_spacing_m);
                if !(separation_m.is_finite() && *separation_m >= 0.0) {
                    issues.push(Issue::new(p("separation_m"), format!("must be finite and >= 0, got {separation_m}")));
                }
                if !(diffracted_angle_deg.is_finite() && *diffracted_angle_deg > 0.0 && *diffracted_angle_deg < 90.0) {
                    issues.push(Issue::new(p("diffracted_angle_deg"), format!("must lie in (0, 90), got {diffracted_angle_deg}")));
                }
                if !matches!(passes, 1 | 2) {
                    issues.push(Issue::new(p("passes"), format!("must be 1 or 2, got {passes}")));
                }
                positive(issues, &p("wavelength_m"), *wavelength_m);
                if let Some(q) = quoted_gdd_s2 {
                    finite(issues, &p("quoted_gdd_s2"), *q);
                }
                finite(issues, &p("delay_slope_s"), *delay_slope_s);
            }
            ElementSpec::Custom {
                name,
                gdd_s2,
                delay_slope_s,
            } => {
                if name.is_empty() {
                    issues.push(Issue::new(p("name"), "must not be empty"));
                }
                finite(issues, &p("gdd_s2"), *gdd_s2);
                finite(issues, &p("delay_slope_s"), *delay_slope_s);
            }
            ElementSpec::Vacuum => {}
        }
    }
}

impl Scenario {
    /// Parses JSON; syntax and schema errors come back as a single issue.
    pub fn from_json(text: &str) -> Result<Self, Vec<Issue>> {
        serde_json::from_str(text).map_err(|e| vec![Issue::new(format!("$ (line {}, column {})", e.line(), e.column()), e.to_string())])
    }

    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        if self.name.trim().is_empty() {
            issues.push(Issue::new("name", "must not be empty"));
        }
        let s = &self.source;
        positive(&mut issues, "source.pump_wavelength_m", s.pump_wavelength_m);
        positive(&mut issues, "source.signal_wavelength_m", s.signal_wavelength_m);
        positive(&mut issues, "source.crystal_length_m", s.crystal_length_m);
        positive(
            &mut issues,
            "source.inverse_group_velocity_difference_s_per_m",
            s.inverse_group_velocity_difference_s_per_m,
        );
        if s.signal_wavelength_m <= s.pump_wavelength_m {
            issues.push(Issue::new("source.signal_wavelength_m", "must exceed the pump wavelength"));
        }
        if let Some(g) = s.gamma {
            positive(&mut issues, "source.gamma", g);
            if s.model == ModelKind::Sinc {
                issues.push(Issue::new("source.gamma", "only applies to the gaussian model"));
            }
        }
        validate_grid_points(&mut issues, "grid.points", self.grid.points);
        if let Some(h) = self.grid.half_span_rad_per_s {
            positive(&mut issues, "grid.half_span_rad_per_s", h);
        }
        if let Some(d) = &self.delays {
            finite(&mut issues, "delays.start_s", d.start_s);
            finite(&mut issues, "delays.stop_s", d.stop_s);
            positive(&mut issues, "delays.step_s", d.step_s);
            if d.stop_s <= d.start_s {
                issues.push(Issue::new("delays.stop_s", "must exceed delays.start_s"));
            }
        }
        validate_elements(&mut issues, "arm1", &self.arm1);
        validate_elements(&mut issues, "arm2", &self.arm2);
        if let Some(b) = &self.baseline_arm2 {
            validate_elements(&mut issues, "baseline_arm2", b);
        }
        if !(self.irf_fwhm_s.is_finite() && self.irf_fwhm_s >= 0.0) {
            issues.push(Issue::new("irf_fwhm_s", format!("must be finite and >= 0, got {}", self.irf_fwhm_s)));
        }
        if let Some(c) = &self.clipping {
            if let Some(w) = c.center_wavelength_m {
                positive(&mut issues, "clipping.center_wavelength_m", w);
            }
            match (c.passband_fwhm_m, c.fit_to_fwhm_s) {
                (Some(p), None) => positive(&mut issues, "clipping.passband_fwhm_m", p),
                (None, Some(t)) => positive(&mut issues, "clipping.fit_to_fwhm_s", t),
                _ => issues.push(Issue::new("clipping", "give exactly one of passband_fwhm_m or fit_to_fwhm_s")),
            }
        }
        if let Some(t) = &self.tcspc {
            positive(&mut issues, "tcspc.bin_width_s", t.bin_width_s);
        }
        if self.outputs.is_empty() {
            issues.push(Issue::new("outputs", "request at least one of g2, slices, classical, mixture"));
        }
        let wants = |k| self.outputs.contains(&k);
        if (wants(OutputKind::G2) || wants(OutputKind::Slices)) && self.delays.is_none() {
            issues.push(Issue::new("delays", "required for g2 and slices outputs"));
        }
        if self.tcspc.is_some() && !wants(OutputKind::G2) {
            issues.push(Issue::new("tcspc", "needs the g2 output"));
        }
        match (&self.slices, wants(OutputKind::Slices)) {
            (None, true) => issues.push(Issue::new("slices", "required when outputs contains slices")),
            (Some(sl), _) => {
                if sl.wavelengths_m.is_empty() {
                    issues.push(Issue::new("slices.wavelengths_m", "must not be empty"));
                }
                for (i, w) in sl.wavelengths_m.iter().enumerate() {
                    positive(&mut issues, &format!("slices.wavelengths_m[{i}]"), *w);
                }
                positive(&mut issues, "slices.passband_fwhm_m", sl.passband_fwhm_m);
                if sl.apply_clipping && self.clipping.is_none() {
                    issues.push(Issue::new("slices.apply_clipping", "no clipping block to apply"));
                }
            }
            _ => {}
        }
        match (&self.classical, wants(OutputKind::Classical)) {
            (None, true) => issues.push(Issue::new("classical", "required when outputs contains classical")),
            (Some(c), _) => {
                if let Some(s) = c.pulse_bandwidth_rad_per_s {
                    positive(&mut issues, "classical.pulse_bandwidth_rad_per_s", s);
                }
                for (i, b) in c.contrast_gdd_s2.iter().enumerate() {
                    finite(&mut issues, &format!("classical.contrast_gdd_s2[{i}]"), *b);
                }
            }
            _ => {}
        }
        match (&self.mixture, wants(OutputKind::Mixture)) {
            (None, true) => issues.push(Issue::new("mixture", "required when outputs contains mixture")),
            (Some(m), _) => {
                positive(&mut issues, "mixture.detuning_step_rad_per_s", m.detuning_step_rad_per_s);
                positive(&mut issues, "mixture.envelope_sigma_rad_per_s", m.envelope_sigma_rad_per_s);
                if m.max_index < 1 {
                    issues.push(Issue::new("mixture.max_index", "must be >= 1"));
                }
                if let Some(s) = m.pulse_bandwidth_rad_per_s {
                    positive(&mut issues, "mixture.pulse_bandwidth_rad_per_s", s);
                }
                positive(&mut issues, "mixture.beta_z_s2", m.beta_z_s2);
                for (i, b) in m.sweep_beta_z_s2.iter().enumerate() {
                    positive(&mut issues, &format!("mixture.sweep_beta_z_s2[{i}]"), *b);
                }
            }
            _ => {}
        }
        for (k, e) in &self.expect {
            let p = format!("expect.{k}");
            match (e.value, e.rel_tol, e.min, e.max) {
                (Some(v), Some(t), None, None) => {
                    finite(&mut issues, &p, v);
                    positive(&mut issues, &format!("{p}.rel_tol"), t);
                }
                (None, None, Some(lo), Some(hi)) if lo <= hi => {}
                _ => issues.push(Issue::new(p, "give value and rel_tol, or min <= max")),
            }
        }
        issues
    }
}

/// Command-line overrides and execution strategy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub grid_points: Option<usize>,
    pub seed: Option<u64>,
    pub exec: Exec,
}

/// Everything a run produced; nothing has touched the filesystem yet.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// (file name, contents), in a fixed order.
    pub files: Vec<(String, String)>,
    pub derived: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub labels: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.derived.get(key).copied()
    }
}

/// Measured curve (after the instrument response) and its fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub g2: G2Evaluation,
    pub measured: CorrelationFunction,
    pub fit: GaussianFit,
}

struct Context<'a> {
    scenario: &'a Scenario,
    pm: PhaseMatching,
    gamma: f64,
    jsa: JointSpectralAmplitude,
    irf: InstrumentResponse,
    exec: Exec,
    resolved: serde_json::Map<String, Value>,
    out: RunOutput,
}

impl Context<'_> {
    fn measure(&self, jsa: &JointSpectralAmplitude, arm1: &DispersionBudget, arm2: &DispersionBudget, delays: &DelayGrid) -> Result<Measured, Error> {
        let opts = G2Options {
            exec: self.exec,
            ..G2Options::default()
        };
        let g2 = g2_numeric_with(jsa, arm1, arm2, delays, &opts)?;
        let measured = convolve_irf_with(&g2.correlation, &self.irf, self.exec)?;
        let fit = fit_gaussian_fwhm(&measured)?;
        Ok(Measured { g2, measured, fit })
    }

    fn set(&mut self, key: &str, v: f64) {
        self.out.derived.insert(key.to_string(), v);
    }

    fn flag(&mut self, key: &str, v: bool) {
        self.out.flags.insert(key.to_string(), v);
    }

    fn file(&mut self, name: &str, contents: String) {
        self.out.files.push((name.to_string(), contents));
    }
}

fn route_label(route: &G2Route) -> String {
    match route {
        G2Route::Direct { points } => format!("direct ({points} points)"),
        G2Route::ChirpKernel {
            fft_points,
            support_points,
        } => format!("chirp_kernel ({fft_points} fft points, {support_points} support points)"),
    }
}

fn resolve_arm(
    specs: &[ElementSpec],
    pm: &PhaseMatching,
    gamma: f64,
    path: &str,
) -> Result<(Vec<DispersiveElement>, Vec<Value>), RunError> {
    let mut elements = Vec::with_capacity(specs.len());
    let mut echo = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let at = |e: Error| RunError::Invalid(vec![Issue::new(format!("{path}[{i}]"), e.to_string())]);
        match spec {
            ElementSpec::Fiber {
                gdd_s2,
                measured_fwhm_s,
                deconvolve_irf_fwhm_s,
                delay_slope_s,
            } => {
                let (gdd, detail) = match (gdd_s2, measured_fwhm_s) {
                    (Some(g), _) => (*g, json!({})),
                    (None, Some(w)) => {
                        let width = match deconvolve_irf_fwhm_s {
                            Some(irf) => deconvolve_quadrature(*w, &InstrumentResponse::new(*irf).map_err(at)?).map_err(at)?,
                            None => *w,
                        };
                        let est = fiber_gdd_from_measured_width(width, pm, gamma).map_err(at)?;
                        (
                            est.gdd,
                            json!({"intrinsic_fwhm_s": width, "asymptotic": est.asymptotic}),
                        )
                    }
                    (None, None) => unreachable!("validated"),
                };
                let el = DispersiveElement::new("fiber", *delay_slope_s, gdd).map_err(at)?;
                let mut v = json!({"name": el.name, "gdd_s2": el.gdd, "delay_slope_s": el.group_delay_slope});
                merge(&mut v, detail);
                echo.push(v);
                elements.push(el);
            }
            ElementSpec::GratingPair {
                groove_spacing_m,
                separation_m,
                diffracted_angle_deg,
                passes,
                wavelength_m,
                quoted_gdd_s2,
                delay_slope_s,
            } => {
                let gp = GratingPair::new(*groove_spacing_m, *separation_m, diffracted_angle_deg.to_radians(), *passes).map_err(at)?;
                let geometry = grating_pair_gdd(&gp, *wavelength_m).map_err(at)?;
                let single = grating_pair_gdd(&gp.with_passes(1).map_err(at)?, *wavelength_m).map_err(at)?;
                let gdd = quoted_gdd_s2.unwrap_or(geometry);
                let el = DispersiveElement::new("grating_pair", *delay_slope_s, gdd).map_err(at)?;
                echo.push(json!({
                    "name": el.name,
                    "gdd_s2": el.gdd,
                    "delay_slope_s": el.group_delay_slope,
                    "geometry_gdd_s2": geometry,
                    "geometry_single_pass_gdd_s2": single,
                    "gdd_source": if quoted_gdd_s2.is_some() { "quoted" } else { "geometry" },
                }));
                elements.push(el);
            }
            ElementSpec::Custom {
                name,
                gdd_s2,
                delay_slope_s,
            } => {
                let el = DispersiveElement::new(name.clone(), *delay_slope_s, *gdd_s2).map_err(at)?;
                echo.push(json!({"name": el.name, "gdd_s2": el.gdd, "delay_slope_s": el.group_delay_slope}));
                elements.push(el);
            }
            ElementSpec::Vacuum => {
                let el = DispersiveElement::vacuum();
                echo.push(json!({"name": el.name, "gdd_s2": 0.0, "delay_slope_s": 0.0}));
                elements.push(el);
            }
        }
    }
    Ok((elements, echo))
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

/// Classical per-pair width at the transform limit equals the quantum one when σ₀ = 1/√(γD²L²).
pub fn matched_pulse_bandwidth(pm: &PhaseMatching, gamma: f64) -> f64 {
    1.0 / pm.gaussian_variance(gamma).sqrt()
}

/// Centred grid with 200 samples per `fwhm` over `span`, coarsened to at most `max_len` samples.
fn auto_grid(center: f64, fwhm: f64, span: f64, max_len: usize) -> Result<DelayGrid, Error> {
    let mut step = fwhm / 200.0;
    let mut len = (span / step).ceil() as usize + 1;
    if len > max_len {
        step = span / (max_len - 1) as f64;
        len = max_len;
    }
    DelayGrid::centered(center, step, len | 1)
}

/// Runs a validated scenario.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let mut issues = scenario.validate();
    let points = opts.grid_points.unwrap_or(scenario.grid.points);
    if let Some(n) = opts.grid_points {
        validate_grid_points(&mut issues, "--grid-points", n);
    }
    if !issues.is_empty() {
        return Err(RunError::Invalid(issues));
    }
    let invalid = |path: &str, e: Error| RunError::Invalid(vec![Issue::new(path, e.to_string())]);

    let s = &scenario.source;
    let pump = PumpSpec::new(s.pump_wavelength_m).map_err(|e| invalid("source.pump_wavelength_m", e))?;
    let pm = PhaseMatching::from_wavelengths(
        s.crystal_length_m,
        s.inverse_group_velocity_difference_s_per_m,
        pump,
        s.signal_wavelength_m,
    )
    .map_err(|e| invalid("source", e))?;
    let gamma = s.gamma.unwrap_or_else(match_gamma);
    let amp_fwhm = match s.model {
        ModelKind::Sinc => sinc_amplitude_fwhm(&pm),
        ModelKind::Gaussian => gaussian_amplitude_fwhm(&pm, gamma),
    };
    let grid = match scenario.grid.half_span_rad_per_s {
        Some(h) => DetuningGrid::new(h, points),
        None => DetuningGrid::covering(amp_fwhm, points),
    }
    .map_err(|e| invalid("grid", e))?;
    let jsa = match s.model {
        ModelKind::Sinc => sinc_jsa(&pm, &grid),
        ModelKind::Gaussian => gaussian_jsa(&pm, gamma, &grid),
    }
    .map_err(|e| invalid("grid", e))?;
    let irf = InstrumentResponse::new(scenario.irf_fwhm_s).map_err(|e| invalid("irf_fwhm_s", e))?;
    let seed = opts.seed.unwrap_or(scenario.seed);

    let (arm1_el, arm1_echo) = resolve_arm(&scenario.arm1, &pm, gamma, "arm1")?;
    let (arm2_el, arm2_echo) = resolve_arm(&scenario.arm2, &pm, gamma, "arm2")?;
    let arm1 = combine(&arm1_el);
    let arm2 = combine(&arm2_el);
    let baseline = match &scenario.baseline_arm2 {
        Some(specs) => {
            let (el, echo) = resolve_arm(specs, &pm, gamma, "baseline_arm2")?;
            Some((combine(&el), echo))
        }
        None => None,
    };

    let mut resolved = serde_json::Map::new();
    resolved.insert("gamma".into(), json!(gamma));
    resolved.insert("walkoff_s".into(), json!(pm.walkoff()));
    resolved.insert("gaussian_variance_s2".into(), json!(pm.gaussian_variance(gamma)));
    resolved.insert("signal_center_rad_per_s".into(), json!(pm.center_signal()));
    resolved.insert("idler_center_rad_per_s".into(), json!(pm.center_idler()));
    resolved.insert(
        "idler_wavelength_m".into(),
        json!(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / pm.center_idler()),
    );
    resolved.insert(
        "detuning_grid".into(),
        json!({"points": grid.point_count(), "half_span_rad_per_s": grid.half_span(), "spacing_rad_per_s": grid.spacing()}),
    );
    resolved.insert("irf_fwhm_s".into(), json!(irf.fwhm));
    resolved.insert("seed".into(), json!(seed));
    resolved.insert("arm1".into(), json!({"elements": arm1_echo, "gdd_s2": arm1.total_gdd, "delay_slope_s": arm1.total_delay_slope}));
    resolved.insert("arm2".into(), json!({"elements": arm2_echo, "gdd_s2": arm2.total_gdd, "delay_slope_s": arm2.total_delay_slope}));
    if let Some((b, echo)) = &baseline {
        resolved.insert(
            "baseline_arm2".into(),
            json!({"elements": echo, "gdd_s2": b.total_gdd, "delay_slope_s": b.total_delay_slope}),
        );
    }

    let mut ctx = Context {
        scenario,
        pm,
        gamma,
        jsa,
        irf,
        exec: opts.exec,
        resolved,
        out: RunOutput {
            files: Vec::new(),
            derived: BTreeMap::new(),
            flags: BTreeMap::new(),
            labels: BTreeMap::new(),
            checks: Vec::new(),
        },
    };
    ctx.set("gamma", gamma);
    ctx.set("b_arm1_s2", arm1.total_gdd);
    ctx.set("b_arm2_s2", arm2.total_gdd);
    ctx.set("b_total_s2", total_gdd(&arm1, &arm2));
    let predicted = fwhm_broadened(&ctx.pm, gamma, total_gdd(&arm1, &arm2))?;
    ctx.set("predicted_fwhm_s", predicted.fwhm);
    ctx.out
        .labels
        .insert("predicted_fwhm_branch".into(), format!("{:?}", predicted.branch).to_lowercase());
    ctx.set("predicted_fwhm_with_irf_s", predicted.fwhm.hypot(irf.fwhm));

    let clipped = resolve_clipping(&mut ctx, &arm1, &arm2)?;
    let wants = |k| scenario.outputs.contains(&k);
    if wants(OutputKind::G2) {
        run_g2(&mut ctx, &arm1, &arm2, baseline.as_ref().map(|b| &b.0), clipped.as_ref(), seed)?;
    }
    if wants(OutputKind::Slices) {
        run_slices(&mut ctx, &arm1, &arm2, baseline.as_ref().map(|b| &b.0), clipped.as_ref())?;
    }
    if wants(OutputKind::Classical) {
        run_classical(&mut ctx, &arm1, &arm2)?;
    }
    if wants(OutputKind::Mixture) {
        run_mixture(&mut ctx)?;
    }

    let mut missing = Vec::new();
    for (key, e) in &scenario.expect {
        let Some(v) = ctx.out.derived.get(key).copied() else {
            missing.push(Issue::new(format!("expect.{key}"), "not a derived quantity of this scenario"));
            continue;
        };
        let check = match (e.value, e.rel_tol, e.min, e.max) {
            (Some(t), Some(tol), _, _) => Check::within_rel(key.clone(), v, t, tol),
            (_, _, Some(lo), Some(hi)) => Check::within_range(key.clone(), v, lo, hi),
            _ => unreachable!("validated"),
        };
        ctx.out.checks.push(check);
    }
    if !missing.is_empty() {
        return Err(RunError::Invalid(missing));
    }

    let manifest = json!({
        "name": scenario.name,
        "scenario": scenario,
        "options": {
            "grid_points": points,
            "seed": seed,
            "exec": format!("{:?}", opts.exec).to_lowercase(),
        },
        "resolved": Value::Object(ctx.resolved.clone()),
        "derived": ctx.out.derived,
        "flags": ctx.out.flags,
        "labels": ctx.out.labels,
        "checks": ctx.out.checks,
        "files": ctx.out.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Compute(Error::invalid("manifest", e.to_string())))?;
    text.push('\n');
    ctx.file("manifest.json", text);
    Ok(ctx.out)
}

fn resolve_clipping(
    ctx: &mut Context<'_>,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
) -> Result<Option<JointSpectralAmplitude>, RunError> {
    let Some(spec) = ctx.scenario.clipping.clone() else {
        return Ok(None);
    };
    let center = spec.arm.center(&ctx.pm);
    let center_wavelength = spec
        .center_wavelength_m
        .unwrap_or(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / center);
    let make = |passband: f64| -> Result<_, Error> {
        let f = SpectralFilter::new(center_wavelength, passband, spec.shape)?;
        apply_filter(&ctx.jsa, &f, center, spec.arm)
    };
    let passband = match (spec.passband_fwhm_m, spec.fit_to_fwhm_s) {
        (Some(p), _) => p,
        (None, Some(target)) => {
            let delays = delay_grid(ctx)?;
            let width = |p: f64| -> Result<f64, Error> { Ok(ctx.measure(&make(p)?.jsa, arm1, arm2, &delays)?.fit.fwhm) };
            let (mut lo, mut hi) = (2.5e-4 * center_wavelength, 0.5 * center_wavelength);
            let (w_lo, w_hi) = (width(lo)?, width(hi)?);
            if !(w_lo <= target && target <= w_hi) {
                return Err(RunError::Invalid(vec![Issue::new(
                    "clipping.fit_to_fwhm_s",
                    format!("target {target:e} s outside the reachable range [{w_lo:e}, {w_hi:e}] s"),
                )]));
            }
            for _ in 0..60 {
                let mid = (lo * hi).sqrt();
                let w = width(mid)?;
                if w < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (w - target).abs() <= 1e-7 * target || hi / lo - 1.0 < 1e-12 {
                    break;
                }
            }
            (lo * hi).sqrt()
        }
        (None, None) => unreachable!("validated"),
    };
    let filtered = make(passband)?;
    ctx.set("clip_passband_fwhm_m", passband);
    ctx.set("clip_center_wavelength_m", center_wavelength);
    ctx.set("clip_transmitted_fraction", filtered.transmitted_fraction);
    ctx.flag("clip_disjoint", filtered.disjoint);
    Ok(Some(filtered.jsa))
}

fn delay_grid(ctx: &Context<'_>) -> Result<DelayGrid, RunError> {
    let d = ctx.scenario.delays.as_ref().ok_or_else(|| RunError::Invalid(vec![Issue::new("delays", "missing")]))?;
    DelayGrid::from_range(d.start_s, d.stop_s, d.step_s).map_err(|e| RunError::Invalid(vec![Issue::new("delays", e.to_string())]))
}

fn fit_file(fit: &GaussianFit) -> String {
    fit.report()
}

fn run_g2(
    ctx: &mut Context<'_>,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    baseline: Option<&DispersionBudget>,
    clipped: Option<&JointSpectralAmplitude>,
    seed: u64,
) -> Result<(), RunError> {
    let delays = delay_grid(ctx)?;
    let unclipped = ctx.measure(&ctx.jsa, arm1, arm2, &delays)?;
    let main = match clipped {
        Some(j) => ctx.measure(j, arm1, arm2, &delays)?,
        None => unclipped.clone(),
    };
    ctx.file("g2.csv", main.g2.correlation.to_csv());
    ctx.file("g2_peak_one.csv", main.g2.correlation.peak_one().to_csv());
    ctx.file("g2_irf.csv", main.measured.to_csv());
    ctx.file("fit.txt", fit_file(&main.fit));
    ctx.out.labels.insert("g2_route".into(), route_label(&main.g2.route));
    ctx.set("g2_max_phase_step_rad", main.g2.max_phase_step);
    ctx.set("g2_fwhm_s", main.g2.correlation.fwhm()?);
    ctx.set("g2_peak_delay_s", main.g2.correlation.peak_delay());
    ctx.set("fit_fwhm_s", main.fit.fwhm);
    ctx.set("fit_center_s", main.fit.center);
    ctx.set("fit_uncertainty_s", main.fit.uncertainty);
    ctx.flag("fit_converged", main.fit.converged);

    if clipped.is_some() {
        ctx.file("g2_unclipped_irf.csv", unclipped.measured.to_csv());
        ctx.file("fit_unclipped.txt", fit_file(&unclipped.fit));
        ctx.set("unclipped_fit_fwhm_s", unclipped.fit.fwhm);
        ctx.set("clipping_share_s", unclipped.fit.fwhm - main.fit.fwhm);
    }
    if let Some(base) = baseline {
        let b = ctx.measure(&ctx.jsa, arm1, base, &delays)?;
        ctx.file("g2_baseline_irf.csv", b.measured.to_csv());
        ctx.file("fit_baseline.txt", fit_file(&b.fit));
        let b_base = total_gdd(arm1, base);
        let b_main = total_gdd(arm1, arm2);
        ctx.set("baseline_b_total_s2", b_base);
        ctx.set("baseline_fit_fwhm_s", b.fit.fwhm);
        let drop = fwhm_broadened(&ctx.pm, ctx.gamma, b_base)?.fwhm - fwhm_broadened(&ctx.pm, ctx.gamma, b_main)?.fwhm;
        ctx.set("predicted_drop_s", drop);
        ctx.set("ndc_share_s", b.fit.fwhm - unclipped.fit.fwhm);
        ctx.set("total_drop_s", b.fit.fwhm - main.fit.fwhm);
    }
    if let Some(t) = ctx.scenario.tcspc.clone() {
        let hist = simulate_tcspc(&main.measured, t.total_counts, t.bin_width_s, seed)?;
        ctx.file("tcspc.csv", hist.to_csv());
        let fit = fit_gaussian_fwhm(&hist.as_curve()?)?;
        ctx.file("fit_tcspc.txt", fit_file(&fit));
        ctx.set("tcspc_fit_fwhm_s", fit.fwhm);
        ctx.set("tcspc_fit_center_s", fit.center);
        ctx.set("tcspc_total_counts", hist.total() as f64);
    }
    Ok(())
}

fn run_slices(
    ctx: &mut Context<'_>,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    baseline: Option<&DispersionBudget>,
    clipped: Option<&JointSpectralAmplitude>,
) -> Result<(), RunError> {
    let spec = ctx.scenario.slices.clone().expect("validated");
    let delays = delay_grid(ctx)?;
    let jsa = match (spec.apply_clipping, clipped) {
        (true, Some(j)) => j,
        _ => &ctx.jsa,
    };
    let mut wavelengths = spec.wavelengths_m.clone();
    wavelengths.sort_by(f64::total_cmp);
    let sweep = |a2: DispersionBudget| -> Result<SliceSweep, Error> {
        let setup = SliceSetup {
            jsa,
            phase_matching: &ctx.pm,
            arm1: *arm1,
            arm2: a2,
            arm: spec.arm,
            passband_fwhm: spec.passband_fwhm_m,
            shape: spec.shape,
            irf: ctx.irf,
            delays,
            exec: ctx.exec,
        };
        crate::measurement::slice_peak_spacing(&setup, &wavelengths)
    };
    let main = sweep(*arm2)?;
    let base = baseline.map(|b| sweep(*b)).transpose()?;
    let (first, last) = (wavelengths[0], wavelengths[wavelengths.len() - 1]);
    // peak = −2Bν − a in the signal detuning; an idler slice sits at ν = −(ω − Ω₂)
    let sign = match spec.arm {
        Arm::Signal => -1.0,
        Arm::Idler => 1.0,
    };
    let b_main = total_gdd(arm1, arm2);
    ctx.file("slices.csv", main.to_csv());
    let excluded = main.slices.iter().filter(|s| s.excluded).count();
    ctx.set("slice_excluded", excluded as f64);
    if let Some(sp) = main.spacing(first, last) {
        ctx.set("slice_spacing_s", sp);
    }
    let dnu = (angular_frequency(first) - angular_frequency(last)).abs();
    ctx.set("slice_detuning_span_rad_per_s", dnu);
    ctx.set("slice_expected_slope_s2", sign * 2.0 * b_main);
    if let Some(slope) = main.slope {
        ctx.set("slice_slope_s2", slope);
        ctx.set("slice_slope_rel_err", (slope - sign * 2.0 * b_main).abs() / (2.0 * b_main).abs());
    }
    if let Some(base) = base {
        ctx.file("slices_baseline.csv", base.to_csv());
        let b_base = total_gdd(arm1, baseline.expect("present"));
        ctx.set("baseline_slice_expected_slope_s2", sign * 2.0 * b_base);
        if let Some(slope) = base.slope {
            ctx.set("baseline_slice_slope_s2", slope);
            ctx.set("baseline_slice_slope_rel_err", (slope - sign * 2.0 * b_base).abs() / (2.0 * b_base).abs());
        }
        if let (Some(sp_base), Some(sp_main)) = (base.spacing(first, last), main.spacing(first, last)) {
            ctx.set("baseline_slice_spacing_s", sp_base);
            ctx.set("slice_spacing_reduction_s", sp_base - sp_main);
        }
        ctx.set("slice_predicted_reduction_s", 2.0 * (b_base - b_main).abs() * dnu);
        let mut reduced = 0usize;
        let mut pairs = 0usize;
        let mut table = String::from("wavelength_a_m,wavelength_b_m,baseline_spacing_s,spacing_s,reduced\n");
        for w in wavelengths.windows(2) {
            if let (Some(a), Some(b)) = (base.spacing(w[0], w[1]), main.spacing(w[0], w[1])) {
                pairs += 1;
                let ok = b < a;
                reduced += usize::from(ok);
                let _ = writeln!(table, "{:e},{:e},{a:e},{b:e},{ok}", w[0], w[1]);
            }
        }
        ctx.file("slice_pairs.csv", table);
        ctx.set("slice_pairs_total", pairs as f64);
        ctx.set("slice_pairs_reduced", reduced as f64);
        ctx.flag("slice_pairs_all_reduced", pairs > 0 && reduced == pairs);
    }
    Ok(())
}

fn run_classical(ctx: &mut Context<'_>, arm1: &DispersionBudget, arm2: &DispersionBudget) -> Result<(), RunError> {
    let spec = ctx.scenario.classical.clone().expect("validated");
    let sigma0 = spec
        .pulse_bandwidth_rad_per_s
        .unwrap_or_else(|| matched_pulse_bandwidth(&ctx.pm, ctx.gamma));
    ctx.set("classical_pulse_bandwidth_rad_per_s", sigma0);
    let pulse = PulseSpec::new(1.0, sigma0, ctx.pm.center_signal())?;
    let idler = PulseSpec::new(1.0, sigma0, ctx.pm.center_idler())?;
    let width = classical_fwhm(sigma0, arm1.total_gdd, arm2.total_gdd)?;
    let center = arm2.total_delay_slope - arm1.total_delay_slope;
    let grid = auto_grid(center, width.fwhm, 10.0 * width.fwhm, 4001)?;
    let joint = classical_joint_probability(&pulse, &idler, arm1, arm2, &grid)?;
    ctx.file("classical.csv", joint.analytic.to_csv());
    ctx.file("classical_numeric.csv", joint.numeric.to_csv());
    ctx.set("classical_fwhm_s", width.fwhm);
    ctx.set("classical_joint_fwhm_s", joint.analytic_fwhm);
    ctx.set("classical_numeric_fwhm_s", joint.numeric_fwhm);
    ctx.set("classical_numeric_rel_diff", joint.fwhm_rel_diff);

    if spec.contrast_gdd_s2.is_empty() {
        return Ok(());
    }
    let opts = G2Options {
        exec: ctx.exec,
        ..G2Options::default()
    };
    let tl_width = crate::quantum::expected_fwhm(&ctx.jsa, 0.0);
    let grid = auto_grid(0.0, tl_width, 10.0 * tl_width, 4001)?;
    let zero = DispersionBudget::zero();
    let tl = g2_numeric_with(&ctx.jsa, &zero, &zero, &grid, &opts)?.correlation.fwhm()?;
    ctx.set("quantum_tl_fwhm_s", tl);
    let mut table = String::from("gdd_s2,quantum_fwhm_s,classical_fwhm_s,ratio\n");
    let mut worst = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    for b in &spec.contrast_gdd_s2 {
        let a1 = DispersionBudget::from_gdd(*b);
        let a2 = DispersionBudget::from_gdd(-b);
        let q = g2_numeric_with(&ctx.jsa, &a1, &a2, &grid, &opts)?.correlation.fwhm()?;
        let c = classical_fwhm(sigma0, *b, -b)?.fwhm;
        worst = worst.max((q - tl).abs() / tl);
        min_ratio = min_ratio.min(c / q);
        let _ = writeln!(table, "{b:e},{q:e},{c:e},{:e}", c / q);
    }
    ctx.file("contrast.csv", table);
    ctx.set("contrast_max_quantum_rel_err", worst);
    ctx.set("contrast_min_classical_ratio", min_ratio);
    Ok(())
}

fn mixture_grid(spec: &MixtureSpec, beta_z: f64) -> Result<DelayGrid, Error> {
    let pair = classical_fwhm(spec.pulse_bandwidth, beta_z, beta_z)?.fwhm;
    let spread = 4.0 * spec.detuning_step * beta_z * f64::from(spec.max_index);
    auto_grid(0.0, pair, 2.0 * (spread + 3.0 * pair), 40_001)
}

fn run_mixture(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let m = ctx.scenario.mixture.clone().expect("validated");
    let sigma0 = m
        .pulse_bandwidth_rad_per_s
        .unwrap_or_else(|| matched_pulse_bandwidth(&ctx.pm, ctx.gamma));
    let spec = MixtureSpec::new(
        ctx.pm.center_signal(),
        m.detuning_step_rad_per_s,
        m.max_index,
        m.envelope_sigma_rad_per_s,
        sigma0,
    )?;
    ctx.set("mixture_pulse_bandwidth_rad_per_s", sigma0);
    let widths = mixture_case_widths(&spec, m.beta_z_s2);
    let grid = mixture_grid(&spec, m.beta_z_s2)?;
    let names = ["pp", "pz", "pm"];
    let deltas = [widths.plus_plus, widths.plus_zero, widths.plus_minus];
    let mut table = String::from("case,delta_tau_s,fwhm_s,single_pair_fwhm_s,floor_fwhm_s,above_floor\n");
    let mixed = MixedSpectrum::gaussian(m.envelope_sigma_rad_per_s, 257, 6.0)?;
    let mut flatness = 0.0f64;
    for (k, (a1, a2)) in mixture_cases(m.beta_z_s2).into_iter().enumerate() {
        let h = mixture_histogram(&spec, &a1, &a2, &grid)?;
        ctx.file(&format!("mixture_{}.csv", names[k]), h.correlation.to_csv());
        let _ = writeln!(
            table,
            "{},{:e},{:e},{:e},{:e},{}",
            names[k], deltas[k], h.fwhm, h.single_pair_fwhm, h.floor_fwhm, h.above_floor
        );
        ctx.set(&format!("mixture_{}_delta_tau_s", names[k]), deltas[k]);
        ctx.set(&format!("mixture_{}_fwhm_s", names[k]), h.fwhm);
        if k == 2 {
            ctx.set("mixture_pm_floor_fwhm_s", h.floor_fwhm);
            ctx.flag("mixture_pm_above_floor", h.above_floor);
        }
        flatness = flatness.max(g2_mixed_state(&mixed, &a1, &a2, &grid)?.flatness);
    }
    ctx.file("mixture.csv", table);
    ctx.flag("mixture_ordered", widths.strictly_ordered());

    let mut sweep = String::from("beta_z_s2,delta_tau_pp_s,delta_tau_pz_s,delta_tau_pm_s,ordered,fwhm_pm_s,floor_fwhm_s,above_floor\n");
    let (mut all_ordered, mut all_floor) = (true, true);
    for bz in &m.sweep_beta_z_s2 {
        let w = mixture_case_widths(&spec, *bz);
        let (a1, a2) = mixture_cases(*bz)[2];
        let h = mixture_histogram(&spec, &a1, &a2, &mixture_grid(&spec, *bz)?)?;
        all_ordered &= w.strictly_ordered();
        all_floor &= h.above_floor;
        for (a1, a2) in mixture_cases(*bz) {
            flatness = flatness.max(g2_mixed_state(&mixed, &a1, &a2, &grid)?.flatness);
        }
        let _ = writeln!(
            sweep,
            "{bz:e},{:e},{:e},{:e},{},{:e},{:e},{}",
            w.plus_plus,
            w.plus_zero,
            w.plus_minus,
            w.strictly_ordered(),
            h.fwhm,
            h.floor_fwhm,
            h.above_floor
        );
    }
    ctx.file("mixture_sweep.csv", sweep);
    ctx.flag("mixture_sweep_ordered", all_ordered);
    ctx.flag("mixture_sweep_above_floor", all_floor);
    ctx.set("mixed_state_flatness_max", flatness);
    Ok(())
}

/// Parses, validates and runs scenario text.
pub fn run_json(text: &str, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let scenario = Scenario::from_json(text).map_err(RunError::Invalid)?;
    run(&scenario, opts)
}

/// Key-value summary of the derived quantities and flags.
pub fn summary(out: &RunOutput) -> String {
    let mut pairs: Vec<(&str, String)> = out.derived.iter().map(|(k, v)| (k.as_str(), format!("{v:e}"))).collect();
    pairs.extend(out.flags.iter().map(|(k, v)| (k.as_str(), v.to_string())));
    pairs.extend(out.labels.iter().map(|(k, v)| (k.as_str(), v.clone())));
    key_values(pairs)
}
