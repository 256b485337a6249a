//! Two-photon correlation G²(τ), τ = t₁ − t₂, for a frequency-anticorrelated pair.
//!
//! The pair amplitude at delay τ is
//!
//! ```text
//! A(τ) = ∫ dν S(ν) exp(iν(τ + α₁z₁ − α₂z₂)) exp(i(β₁z₁ + β₂z₂)ν²)
//! ```
//!
//! and G²(τ) = |A(τ)|². Only the *sum* B = β₁z₁ + β₂z₂ enters, which is why a
//! negative GDD in one arm cancels a positive GDD in the other.
//!
//! Two discretizations of the same integral are available:
//!
//! * **direct**: the rectangle rule on the detuning grid. It needs the total
//!   phase step between adjacent detunings, `(2|B|ν_max + |τ'|)Δν`, to stay
//!   below π/4, which for strongly chirped pairs means millions of samples.
//! * **chirp kernel**: with ŝ(t) = (1/2π)∫S(ν)e^{−iνt}dν,
//!   `A(τ') = √(π/|B|) e^{±iπ/4} ∫ dt ŝ(t) exp(−i(t + τ')²/4B)`.
//!   ŝ is obtained by FFT of the sampled amplitude, zero-padded until the
//!   phase step of the time-domain sum, `(|t| + |τ'|)Δt/2|B|`, is below π/4.
//!
//! The direct route is used whenever its criterion holds.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::curve::{CorrelationFunction, DelayGrid};
use crate::dispersion::{broadening_rate, DispersionBudget, ASYMPTOTIC_RATIO};
use crate::error::require_positive;
use crate::exec::Exec;
use crate::spectral::{JointSpectralAmplitude, PhaseMatching};
use crate::{Error, Result, FWHM_PER_SIGMA};

/// Largest FFT the chirp-kernel route will plan.
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

/// Time-domain samples below this fraction of the peak |ŝ| are skipped.
const KERNEL_SUPPORT_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Options {
    pub exec: Exec,
    pub max_points: usize,
    /// Skip the "delay grid spans 4x the expected width" precondition.
    pub allow_short_window: bool,
}

impl Default for G2Options {
    fn default() -> Self {
        Self {
            exec: Exec::default(),
            max_points: DEFAULT_MAX_POINTS,
            allow_short_window: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum G2Route {
    Direct { points: usize },
    ChirpKernel { fft_points: usize, support_points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Evaluation {
    pub correlation: CorrelationFunction,
    pub route: G2Route,
    /// Largest phase step of the chosen discretization (rad).
    pub max_phase_step: f64,
}

/// Parameters of the Gaussian-model closed form `C·exp(−(τ − τ̄)²/2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormG2 {
    pub peak_delay: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

impl ClosedFormG2 {
    pub fn fwhm(&self) -> f64 {
        FWHM_PER_SIGMA * self.sigma
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let d = tau - self.peak_delay;
        self.amplitude * (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn sample(&self, delays: &DelayGrid) -> Result<CorrelationFunction> {
        CorrelationFunction::new(*delays, delays.iter().map(|t| self.eval(t)).collect())
    }
}

/// Sum of both arms' GDD, the only second-order quantity the pair feels.
pub fn total_gdd(arm1: &DispersionBudget, arm2: &DispersionBudget) -> f64 {
    arm1.total_gdd + arm2.total_gdd
}

/// α₁z₁ − α₂z₂: the phase slope that places the peak at τ̄ = α₂z₂ − α₁z₁.
fn delay_offset(arm1: &DispersionBudget, arm2: &DispersionBudget) -> f64 {
    arm1.total_delay_slope - arm2.total_delay_slope
}

/// FWHM expected from the rms bandwidth of |S|²; exact for Gaussian amplitudes.
pub fn expected_fwhm(jsa: &JointSpectralAmplitude, gdd: f64) -> f64 {
    let (_, var) = jsa.intensity_moments();
    if var <= 0.0 {
        return 0.0;
    }
    let a = 1.0 / (4.0 * var);
    FWHM_PER_SIGMA * (a + gdd * gdd / a).sqrt()
}

pub fn g2_numeric(
    jsa: &JointSpectralAmplitude,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    delays: &DelayGrid,
) -> Result<CorrelationFunction> {
    Ok(g2_numeric_with(jsa, arm1, arm2, delays, &G2Options::default())?.correlation)
}

pub fn g2_numeric_with(
    jsa: &JointSpectralAmplitude,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    delays: &DelayGrid,
    opts: &G2Options,
) -> Result<G2Evaluation> {
    let b = total_gdd(arm1, arm2);
    let a = delay_offset(arm1, arm2);
    if !opts.allow_short_window {
        let expected = expected_fwhm(jsa, b);
        if delays.span() < 4.0 * expected * (1.0 - 1e-9) {
            return Err(Error::DelayWindowTooShort {
                span: delays.span(),
                expected_fwhm: expected,
            });
        }
    }

    let grid = jsa.grid();
    let dnu = grid.spacing();
    let nu_max = grid.max_abs();
    let shifted_max = (delays.start() + a).abs().max((delays.stop() + a).abs());
    let direct_step = (2.0 * b.abs() * nu_max + shifted_max) * dnu;
    if direct_step < FRAC_PI_4 {
        let correlation = direct_sum(jsa, b, a, delays, opts.exec)?;
        return Ok(G2Evaluation {
            correlation,
            route: G2Route::Direct {
                points: grid.point_count(),
            },
            max_phase_step: direct_step,
        });
    }

    let direct_required = {
        let n = 8.0 * (2.0 * b.abs() * nu_max + shifted_max) * nu_max / PI + 1.0;
        (n.ceil() as usize).next_power_of_two()
    };
    if b == 0.0 {
        return Err(Error::PhaseUndersampled {
            max_step: direct_step,
            required_points: direct_required,
        });
    }
    chirp_kernel_sum(jsa, b, a, delays, opts).map_err(|e| match e {
        Error::PhaseUndersampled { max_step, .. } => Error::PhaseUndersampled {
            max_step: max_step.max(direct_step),
            required_points: direct_required,
        },
        other => other,
    })
}

fn direct_sum(
    jsa: &JointSpectralAmplitude,
    b: f64,
    a: f64,
    delays: &DelayGrid,
    exec: Exec,
) -> Result<CorrelationFunction> {
    let dnu = jsa.grid().spacing();
    let nus = jsa.grid().samples();
    let weighted: Vec<Complex64> = nus
        .iter()
        .zip(jsa.values())
        .map(|(nu, s)| s * Complex64::cis(b * nu * nu) * dnu)
        .collect();
    let values = exec.map_range(delays.len(), |j| {
        let shift = delays.at(j) + a;
        let amp: Complex64 = nus
            .iter()
            .zip(&weighted)
            .map(|(nu, c)| c * Complex64::cis(nu * shift))
            .sum();
        amp.norm_sqr()
    });
    CorrelationFunction::new(*delays, values)
}

/// ŝ(t_k) on the M-point time grid conjugate to the detuning grid, zero-padded.
fn time_domain(jsa: &JointSpectralAmplitude, m: usize) -> (f64, Vec<(f64, Complex64)>) {
    let grid = jsa.grid();
    let dnu = grid.spacing();
    let nu0 = grid.first();
    let dt = 2.0 * PI / (m as f64 * dnu);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..grid.point_count()].copy_from_slice(jsa.values());
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let peak = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let cut = peak * KERNEL_SUPPORT_THRESHOLD;
    let scale = dnu / (2.0 * PI);
    let half = (m / 2) as i64;
    let support = buf
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > cut)
        .map(|(k, v)| {
            let k = k as i64;
            let signed = if k >= half { k - m as i64 } else { k };
            let t = signed as f64 * dt;
            (t, v * Complex64::cis(-nu0 * t) * scale)
        })
        .collect();
    (dt, support)
}

fn chirp_kernel_sum(
    jsa: &JointSpectralAmplitude,
    b: f64,
    a: f64,
    delays: &DelayGrid,
    opts: &G2Options,
) -> Result<G2Evaluation> {
    let n = jsa.grid().point_count();
    let dnu = jsa.grid().spacing();
    let shifted_max = (delays.start() + a).abs().max((delays.stop() + a).abs());

    let (probe_dt, probe) = time_domain(jsa, n);
    let t_max = probe.iter().map(|(t, _)| t.abs()).fold(0.0, f64::max);
    let dt_limit = FRAC_PI_4 * 2.0 * b.abs() / (t_max + shifted_max);
    let needed = (2.0 * PI / (dnu * dt_limit)).ceil();
    let m = if needed <= n as f64 {
        n
    } else if needed > opts.max_points as f64 {
        return Err(Error::PhaseUndersampled {
            max_step: (t_max + shifted_max) * (2.0 * PI / (n as f64 * dnu)) / (2.0 * b.abs()),
            required_points: usize::MAX,
        });
    } else {
        (needed as usize).next_power_of_two()
    };
    let (dt, support) = if m == n { (probe_dt, probe) } else { time_domain(jsa, m) };
    let t_max = support.iter().map(|(t, _)| t.abs()).fold(0.0, f64::max);
    let max_phase_step = (t_max + shifted_max) * dt / (2.0 * b.abs());
    if max_phase_step >= FRAC_PI_4 {
        return Err(Error::PhaseUndersampled {
            max_step: max_phase_step,
            required_points: usize::MAX,
        });
    }

    // the common factor exp(−iτ'²/4B) drops out of |A|²
    let inv4b = 1.0 / (4.0 * b);
    let prefactor = PI / b.abs() * dt * dt;
    let values = opts.exec.map_range(delays.len(), |j| {
        let shifted = delays.at(j) + a;
        let amp: Complex64 = support
            .iter()
            .map(|(t, s)| s * Complex64::cis(-(t * t + 2.0 * t * shifted) * inv4b))
            .sum();
        prefactor * amp.norm_sqr()
    });
    Ok(G2Evaluation {
        correlation: CorrelationFunction::new(*delays, values)?,
        route: G2Route::ChirpKernel {
            fft_points: m,
            support_points: support.len(),
        },
        max_phase_step,
    })
}

/// τ̄ = α₂z₂ − α₁z₁, σ² = γD²L² + B²/γD²L², C = π/√(γ²D⁴L⁴ + B²).
pub fn g2_closed_form(
    pm: &PhaseMatching,
    gamma: f64,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
) -> Result<ClosedFormG2> {
    require_positive("gamma", gamma)?;
    let a = pm.gaussian_variance(gamma);
    let b = total_gdd(arm1, arm2);
    Ok(ClosedFormG2 {
        peak_delay: arm2.total_delay_slope - arm1.total_delay_slope,
        sigma: (a + b * b / a).sqrt(),
        amplitude: PI / (a * a + b * b).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthBranch {
    Asymptotic,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadenedWidth {
    pub fwhm: f64,
    pub branch: WidthBranch,
}

/// 2√(2ln2/γD²L²)·|B| when |B| ≫ γD²L², otherwise the exact Gaussian FWHM.
pub fn fwhm_broadened(pm: &PhaseMatching, gamma: f64, gdd: f64) -> Result<BroadenedWidth> {
    require_positive("gamma", gamma)?;
    let a = pm.gaussian_variance(gamma);
    if gdd.abs() >= ASYMPTOTIC_RATIO * a {
        Ok(BroadenedWidth {
            fwhm: broadening_rate(pm, gamma) * gdd.abs(),
            branch: WidthBranch::Asymptotic,
        })
    } else {
        Ok(BroadenedWidth {
            fwhm: FWHM_PER_SIGMA * (a + gdd * gdd / a).sqrt(),
            branch: WidthBranch::Exact,
        })
    }
}

/// Width removed by a remote GDD of magnitude |β₂z₂|: 2√(2ln2/γD²L²)·|β₂z₂|.
pub fn ndc_reduction(pm: &PhaseMatching, gamma: f64, gdd2: f64) -> Result<f64> {
    require_positive("gamma", gamma)?;
    Ok(broadening_rate(pm, gamma) * gdd2.abs())
}

/// Incoherent mixture of monochromatic pairs (Ω₁ + ν, Ω₂ − ν) with weights f₁(ν)f₂(ν)Δν.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpectrum {
    detunings: Vec<f64>,
    weights: Vec<f64>,
}

impl MixedSpectrum {
    /// f₁ = f₂ = exp(−ν²/2σ²) on `points` samples over ±`span_sigmas`·σ, weights summing to 1.
    pub fn gaussian(sigma: f64, points: usize, span_sigmas: f64) -> Result<Self> {
        require_positive("mixture sigma", sigma)?;
        require_positive("mixture span", span_sigmas)?;
        if points < 2 {
            return Err(Error::invalid("mixture points", "need at least 2"));
        }
        let half = span_sigmas * sigma;
        let step = 2.0 * half / (points - 1) as f64;
        let detunings: Vec<f64> = (0..points).map(|i| -half + step * i as f64).collect();
        let raw: Vec<f64> = detunings.iter().map(|nu| (-nu * nu / (sigma * sigma)).exp()).collect();
        Self::from_weights(detunings, raw)
    }

    /// A single frequency pair.
    pub fn single(detuning: f64) -> Self {
        Self {
            detunings: vec![detuning],
            weights: vec![1.0],
        }
    }

    /// Weights are rescaled to sum to 1.
    pub fn from_weights(detunings: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if detunings.len() != weights.len() || detunings.is_empty() {
            return Err(Error::invalid("mixture weights", "need one weight per detuning"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("mixture weights", "must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        require_positive("mixture total weight", total)?;
        Ok(Self {
            detunings,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedStateResult {
    pub correlation: CorrelationFunction,
    /// (max − min)/mean of the correlation.
    pub flatness: f64,
}

/// Σᵢ wᵢ·|aᵢ(τ)|², each aᵢ a single monochromatic pair carried through both arms.
pub fn g2_mixed_state(
    spectrum: &MixedSpectrum,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    delays: &DelayGrid,
) -> Result<MixedStateResult> {
    let values = Exec::default().map_range(delays.len(), |j| {
        let tau = delays.at(j);
        spectrum
            .detunings
            .iter()
            .zip(&spectrum.weights)
            .map(|(nu, w)| {
                let phase1 = arm1.total_delay_slope * nu + arm1.total_gdd * nu * nu + nu * tau;
                let phase2 = -arm2.total_delay_slope * nu + arm2.total_gdd * nu * nu;
                let amp = Complex64::cis(phase1) * Complex64::cis(phase2);
                w * amp.norm_sqr()
            })
            .sum::<f64>()
    });
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(MixedStateResult {
        correlation: CorrelationFunction::new(*delays, values)?,
        flatness: (max - min) / mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::fiber_gdd_from_measured_width;
    use crate::spectral::{gaussian_amplitude_fwhm, gaussian_jsa, DetuningGrid, PumpSpec, DEFAULT_GRID_POINTS};
    use approx::assert_relative_eq;

    const GAMMA: f64 = 0.04822;

    fn pm() -> PhaseMatching {
        let pump = PumpSpec::new(408.2e-9).unwrap();
        PhaseMatching::from_wavelengths(3e-3, 88.9e-15 / 3e-3, pump, 896e-9).unwrap()
    }

    fn jsa(points: usize) -> JointSpectralAmplitude {
        let pm = pm();
        let grid = DetuningGrid::covering(gaussian_amplitude_fwhm(&pm, GAMMA), points).unwrap();
        gaussian_jsa(&pm, GAMMA, &grid).unwrap()
    }

    fn window(center: f64, fwhm: f64) -> DelayGrid {
        DelayGrid::centered(center, 10.0 * fwhm / 2000.0, 2001).unwrap()
    }

    fn closed(b1: f64, b2: f64) -> ClosedFormG2 {
        g2_closed_form(&pm(), GAMMA, &DispersionBudget::from_gdd(b1), &DispersionBudget::from_gdd(b2)).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let cf = closed(0.0, 0.0);
        // (88.9 fs)² · 0.04822 by hand
        assert_relative_eq!(cf.sigma * cf.sigma, 3.8109e-28, max_relative = 1e-4);
        assert_relative_eq!(cf.fwhm(), 46.0e-15, max_relative = 1e-3);
        let shifted = g2_closed_form(&pm(), GAMMA, &DispersionBudget::zero(), &DispersionBudget::from_delay(1e-9)).unwrap();
        assert_eq!(shifted.peak_delay, 1e-9);
        assert_relative_eq!(closed(3.20e-23, 0.0).fwhm(), 3.86e-9, max_relative = 2e-3);
    }

    #[test]
    fn broadened_width_examples() {
        let pm = pm();
        let w = fwhm_broadened(&pm, GAMMA, (2.03e-12_f64).powi(2)).unwrap();
        assert_eq!(w.branch, WidthBranch::Asymptotic);
        assert_relative_eq!(w.fwhm, 497e-12, max_relative = 1e-3);
        let w0 = fwhm_broadened(&pm, GAMMA, 0.0).unwrap();
        assert_eq!(w0.branch, WidthBranch::Exact);
        assert_relative_eq!(w0.fwhm, 46.0e-15, max_relative = 1e-3);
        let b = 1e-23;
        let ratio = fwhm_broadened(&pm, GAMMA, 2.0 * b).unwrap().fwhm / fwhm_broadened(&pm, GAMMA, b).unwrap().fwhm;
        assert_relative_eq!(ratio, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn ndc_examples() {
        let pm = pm();
        assert_relative_eq!(ndc_reduction(&pm, GAMMA, -(2.03e-12_f64).powi(2)).unwrap(), 496e-12, max_relative = 3e-3);
        assert_eq!(ndc_reduction(&pm, GAMMA, 0.0).unwrap(), 0.0);
        let full = ndc_reduction(&pm, GAMMA, 4.12e-24).unwrap();
        assert_relative_eq!(ndc_reduction(&pm, GAMMA, 2.06e-24).unwrap(), full / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn transform_limited_numeric() {
        let jsa = jsa(DEFAULT_GRID_POINTS);
        let delays = window(0.0, 46e-15);
        let ev = g2_numeric_with(&jsa, &DispersionBudget::zero(), &DispersionBudget::zero(), &delays, &G2Options::default()).unwrap();
        assert!(matches!(ev.route, G2Route::Direct { .. }));
        let cf = closed(0.0, 0.0);
        assert_relative_eq!(ev.correlation.fwhm().unwrap(), cf.fwhm(), max_relative = 1e-4);
        // unnormalized peak reproduces C
        assert_relative_eq!(ev.correlation.peak_value(), cf.amplitude, max_relative = 1e-6);
    }

    #[test]
    fn fiber_numeric() {
        let jsa = jsa(DEFAULT_GRID_POINTS);
        let b = 3.20e-23;
        let cf = closed(b, 0.0);
        let delays = window(0.0, cf.fwhm());
        let ev = g2_numeric_with(&jsa, &DispersionBudget::from_gdd(b), &DispersionBudget::zero(), &delays, &G2Options::default()).unwrap();
        assert!(matches!(ev.route, G2Route::ChirpKernel { .. }), "{:?}", ev.route);
        assert_relative_eq!(ev.correlation.fwhm().unwrap(), 3.86e-9, max_relative = 2e-3);
        assert_relative_eq!(ev.correlation.peak_value(), cf.amplitude, max_relative = 1e-6);
    }

    #[test]
    fn routes_agree_where_both_apply() {
        // small chirp and a short window: direct route is valid on a 2^14 grid
        let jsa = jsa(DEFAULT_GRID_POINTS);
        let b = 2e-27;
        let cf = closed(b, 0.0);
        let delays = window(0.0, cf.fwhm());
        let direct = direct_sum(&jsa, b, 0.0, &delays, Exec::default()).unwrap();
        let ev = chirp_kernel_sum(&jsa, b, 0.0, &delays, &G2Options::default()).unwrap();
        let scale = direct.peak_value();
        for (x, y) in direct.values().iter().zip(ev.correlation.values()) {
            assert!((x - y).abs() < 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn first_order_shift_translates_peak() {
        let jsa = jsa(DEFAULT_GRID_POINTS);
        let b = 1e-24;
        let fw = closed(b, 0.0).fwhm();
        let delays = window(1e-9, fw);
        let c = g2_numeric(&jsa, &DispersionBudget::from_gdd(b), &DispersionBudget::from_delay(1e-9), &delays).unwrap();
        assert!((c.peak_delay() - 1e-9).abs() <= delays.step());
        assert_relative_eq!(c.fwhm().unwrap(), fw, max_relative = 5e-3);
    }

    #[test]
    fn short_window_rejected() {
        let jsa = jsa(DEFAULT_GRID_POINTS);
        let delays = DelayGrid::centered(0.0, 1e-12, 101).unwrap();
        let err = g2_numeric(&jsa, &DispersionBudget::from_gdd(3.2e-23), &DispersionBudget::zero(), &delays).unwrap_err();
        assert!(matches!(err, Error::DelayWindowTooShort { .. }));
    }

    #[test]
    fn undersampled_reports_required_points() {
        let jsa = jsa(1 << 10);
        let delays = DelayGrid::centered(0.0, 1e-11, 2001).unwrap();
        let opts = G2Options {
            max_points: 1 << 10,
            ..G2Options::default()
        };
        let err = g2_numeric_with(&jsa, &DispersionBudget::from_gdd(3.2e-23), &DispersionBudget::zero(), &delays, &opts).unwrap_err();
        match err {
            Error::PhaseUndersampled { max_step, required_points } => {
                assert!(max_step > FRAC_PI_4);
                assert!(required_points > 1 << 20);
                assert!(required_points.is_power_of_two());
            }
            other => panic!("unexpected {other:?}"),
        }
        // zero chirp but the window aliases the direct sum
        let wide = DelayGrid::centered(0.0, 1e-12, 2001).unwrap();
        let err = g2_numeric(&jsa, &DispersionBudget::zero(), &DispersionBudget::zero(), &wide).unwrap_err();
        assert!(matches!(err, Error::PhaseUndersampled { .. }));
    }

    #[test]
    fn fiber_estimate_feeds_numeric_width() {
        let pm = pm();
        let est = fiber_gdd_from_measured_width(3.785e-9, &pm, GAMMA).unwrap();
        let jsa = jsa(DEFAULT_GRID_POINTS);
        let delays = DelayGrid::from_range(-12e-9, 12e-9, 16e-12).unwrap();
        let c = g2_numeric(&jsa, &DispersionBudget::from_gdd(est.gdd), &DispersionBudget::zero(), &delays).unwrap();
        assert_relative_eq!(c.fwhm().unwrap(), 3.785e-9, max_relative = 1e-3);
    }

    #[test]
    fn mixed_state_is_flat() {
        let spectrum = MixedSpectrum::gaussian(3e13, 513, 6.0).unwrap();
        let delays = DelayGrid::centered(0.0, 1e-11, 801).unwrap();
        for (b1, b2) in [(0.0, 0.0), (3.2e-23, -4.1e-24), (-1e-22, 1e-22)] {
            let r = g2_mixed_state(&spectrum, &DispersionBudget::from_gdd(b1), &DispersionBudget::from_gdd(b2), &delays).unwrap();
            assert!(r.flatness < 1e-9, "{}", r.flatness);
            assert_relative_eq!(r.correlation.values()[400], 1.0, max_relative = 1e-12);
        }
        let single = g2_mixed_state(&MixedSpectrum::single(1e13), &DispersionBudget::from_gdd(1e-23), &DispersionBudget::zero(), &delays).unwrap();
        assert!(single.flatness < 1e-9);
    }
}
