//! Classical baselines: dispersed transform-limited pulse pairs and a
//! frequency-anticorrelated mixture of such pairs.
//!
//! A Gaussian pulse of bandwidth σ₀ through an arm with GDD βz arrives as a
//! Gaussian intensity of variance σ₁² = 2σ₀²(1/4σ₀⁴ + β²z²) centred on αz. The
//! joint detection probability of two independent pulses has variance
//! σ₁² + σ₂², which depends on the *squares* of the two GDDs, so opposite signs
//! never cancel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{CorrelationFunction, DelayGrid};
use crate::dispersion::DispersionBudget;
use crate::error::require_positive;
use crate::exec::Exec;
use crate::quantum::WidthBranch;
use crate::{Error, Result, FWHM_PER_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub amplitude: f64,
    /// σ₀ (rad/s).
    pub bandwidth: f64,
    /// Ωᵢ (rad/s); carried for reports, the envelopes do not depend on it.
    pub center: f64,
}

impl PulseSpec {
    pub fn new(amplitude: f64, bandwidth: f64, center: f64) -> Result<Self> {
        require_positive("pulse bandwidth", bandwidth)?;
        if !amplitude.is_finite() {
            return Err(Error::invalid("pulse amplitude", "must be finite"));
        }
        Ok(Self {
            amplitude,
            bandwidth,
            center,
        })
    }

    /// σ₁² = 2σ₀²(1/4σ₀⁴ + β²z²).
    pub fn dispersed_variance(&self, gdd: f64) -> f64 {
        let s2 = self.bandwidth * self.bandwidth;
        2.0 * s2 * (1.0 / (4.0 * s2 * s2) + gdd * gdd)
    }

    /// Intensity at time t after the arm: E₀²/(4π|a|²)·exp(−(αz − t)²/2σ₁²), |a|² = |1/2σ₀² − iβz|.
    pub fn intensity(&self, arm: &DispersionBudget, t: f64) -> f64 {
        let s2 = self.bandwidth * self.bandwidth;
        let a_mod = (1.0 / (4.0 * s2 * s2) + arm.total_gdd * arm.total_gdd).sqrt();
        let var = self.dispersed_variance(arm.total_gdd);
        let d = arm.total_delay_slope - t;
        self.amplitude * self.amplitude / (4.0 * PI * a_mod) * (-d * d / (2.0 * var)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersedIntensity {
    pub times: DelayGrid,
    pub samples: Vec<f64>,
    /// σ₁ (s).
    pub sigma: f64,
    pub peak_time: f64,
}

pub fn dispersed_intensity(pulse: &PulseSpec, arm: &DispersionBudget, times: &DelayGrid) -> Result<DispersedIntensity> {
    let sigma = pulse.dispersed_variance(arm.total_gdd).sqrt();
    let center = arm.total_delay_slope;
    if times.start() > center - 4.0 * sigma || times.stop() < center + 4.0 * sigma {
        return Err(Error::invalid(
            "time grid",
            format!("must cover the pulse centre {center:e} s +/- 4 sigma ({sigma:e} s)"),
        ));
    }
    Ok(DispersedIntensity {
        times: *times,
        samples: times.iter().map(|t| pulse.intensity(arm, t)).collect(),
        sigma,
        peak_time: center,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalJoint {
    pub analytic: CorrelationFunction,
    pub numeric: CorrelationFunction,
    pub analytic_fwhm: f64,
    pub numeric_fwhm: f64,
    /// |numeric − analytic| / analytic FWHM.
    pub fwhm_rel_diff: f64,
    pub peak_delay: f64,
    pub variance: f64,
}

/// P(τ) = ∫dt I₁(t)I₂(t + τ): Gaussian at τ̄ = α₂z₂ − α₁z₁ with variance σ₁² + σ₂².
///
/// The analytic curve uses the closed form; the numeric one integrates the
/// intensity product directly, resolving whichever pulse is narrower.
pub fn classical_joint_probability(
    p1: &PulseSpec,
    p2: &PulseSpec,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    taus: &DelayGrid,
) -> Result<ClassicalJoint> {
    let v1 = p1.dispersed_variance(arm1.total_gdd);
    let v2 = p2.dispersed_variance(arm2.total_gdd);
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let variance = v1 + v2;
    let peak_delay = arm2.total_delay_slope - arm1.total_delay_slope;

    // Σ_t I₁ I₂ Δt → C from the product of the two Gaussian prefactors
    let pref = |p: &PulseSpec, gdd: f64| {
        let s2 = p.bandwidth * p.bandwidth;
        p.amplitude * p.amplitude / (4.0 * PI * (1.0 / (4.0 * s2 * s2) + gdd * gdd).sqrt())
    };
    let c = pref(p1, arm1.total_gdd) * pref(p2, arm2.total_gdd) * (2.0 * PI * v1 * v2 / variance).sqrt();
    let analytic_values = taus
        .iter()
        .map(|tau| {
            let d = tau - peak_delay;
            c * (-d * d / (2.0 * variance)).exp()
        })
        .collect();
    let analytic = CorrelationFunction::new(*taus, analytic_values)?;

    const HALF_SPAN_SIGMAS: f64 = 10.0;
    const POINTS: usize = 2048;
    let numeric_values = Exec::default().map_range(taus.len(), |j| {
        let tau = taus.at(j);
        if s1 <= s2 {
            let center = arm1.total_delay_slope;
            let dt = 2.0 * HALF_SPAN_SIGMAS * s1 / (POINTS - 1) as f64;
            (0..POINTS)
                .map(|k| {
                    let t = center - HALF_SPAN_SIGMAS * s1 + dt * k as f64;
                    p1.intensity(arm1, t) * p2.intensity(arm2, t + tau)
                })
                .sum::<f64>()
                * dt
        } else {
            // s = t + τ
            let center = arm2.total_delay_slope;
            let ds = 2.0 * HALF_SPAN_SIGMAS * s2 / (POINTS - 1) as f64;
            (0..POINTS)
                .map(|k| {
                    let s = center - HALF_SPAN_SIGMAS * s2 + ds * k as f64;
                    p1.intensity(arm1, s - tau) * p2.intensity(arm2, s)
                })
                .sum::<f64>()
                * ds
        }
    });
    let numeric = CorrelationFunction::new(*taus, numeric_values)?;
    let analytic_fwhm = analytic.fwhm()?;
    let numeric_fwhm = numeric.fwhm()?;
    Ok(ClassicalJoint {
        fwhm_rel_diff: (numeric_fwhm - analytic_fwhm).abs() / analytic_fwhm,
        analytic,
        numeric,
        analytic_fwhm,
        numeric_fwhm,
        peak_delay,
        variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalWidth {
    pub fwhm: f64,
    pub branch: WidthBranch,
}

/// Ratio of the dispersive terms to the transform-limited term above which
/// the large-dispersion width law is used.
pub const LARGE_DISPERSION_RATIO: f64 = 1e4;

/// 4√ln2·σ₀·√(B₁² + B₂²) for large dispersion, otherwise 2√(2ln2)·σ_T with
/// σ_T² = 2σ₀²(1/2σ₀⁴ + B₁² + B₂²).
pub fn classical_fwhm(sigma0: f64, b1: f64, b2: f64) -> Result<ClassicalWidth> {
    require_positive("pulse bandwidth", sigma0)?;
    let s2 = sigma0 * sigma0;
    let dispersive = b1 * b1 + b2 * b2;
    let tl = 1.0 / (2.0 * s2 * s2);
    if dispersive >= LARGE_DISPERSION_RATIO * tl {
        Ok(ClassicalWidth {
            fwhm: 4.0 * std::f64::consts::LN_2.sqrt() * sigma0 * dispersive.sqrt(),
            branch: WidthBranch::Asymptotic,
        })
    } else {
        Ok(ClassicalWidth {
            fwhm: FWHM_PER_SIGMA * (2.0 * s2 * (tl + dispersive)).sqrt(),
            branch: WidthBranch::Exact,
        })
    }
}

/// Mixture of pulse pairs at (Ω + mν, Ω − mν), m ∈ [−M, M], weighted by a
/// Gaussian filter envelope in mν.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub center: f64,
    pub detuning_step: f64,
    pub max_index: u32,
    pub envelope_sigma: f64,
    /// σ₀ of every pulse in the mixture (rad/s).
    pub pulse_bandwidth: f64,
}

impl MixtureSpec {
    pub fn new(center: f64, detuning_step: f64, max_index: u32, envelope_sigma: f64, pulse_bandwidth: f64) -> Result<Self> {
        require_positive("mixture detuning step", detuning_step)?;
        require_positive("mixture envelope sigma", envelope_sigma)?;
        require_positive("pulse bandwidth", pulse_bandwidth)?;
        if max_index < 1 {
            return Err(Error::invalid("mixture index range", "M must be >= 1"));
        }
        Ok(Self {
            center,
            detuning_step,
            max_index,
            envelope_sigma,
            pulse_bandwidth,
        })
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let m = i64::from(self.max_index);
        -m..=m
    }

    pub fn weight(&self, m: i64) -> f64 {
        let x = m as f64 * self.detuning_step / self.envelope_sigma;
        (-x * x / 2.0).exp()
    }
}

/// τ_m = z₁/v₁(Ω + mν) − z₂/v₂(Ω − mν) with z/v(Ω ± δ) = αz ± 2βzδ,
/// i.e. τ₀ + 2mν(β₁z₁ + β₂z₂) with τ₀ = α₁z₁ − α₂z₂.
pub fn mixture_peak_delay(spec: &MixtureSpec, m: i64, arm1: &DispersionBudget, arm2: &DispersionBudget) -> f64 {
    let delta = m as f64 * spec.detuning_step;
    let t1 = arm1.total_delay_slope + 2.0 * arm1.total_gdd * delta;
    let t2 = arm2.total_delay_slope - 2.0 * arm2.total_gdd * delta;
    t1 - t2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureCaseWidths {
    /// Δτ(+β, +β)
    pub plus_plus: f64,
    /// Δτ(+β, 0)
    pub plus_zero: f64,
    /// Δτ(+β, −β)
    pub plus_minus: f64,
}

impl MixtureCaseWidths {
    pub fn strictly_ordered(&self) -> bool {
        self.plus_plus > self.plus_zero && self.plus_zero > self.plus_minus
    }
}

/// The three dispersion cases with arm budgets (+βz, ±βz or 0).
pub fn mixture_cases(beta_z: f64) -> [(DispersionBudget, DispersionBudget); 3] {
    let plus = DispersionBudget::from_gdd(beta_z);
    [
        (plus, DispersionBudget::from_gdd(beta_z)),
        (plus, DispersionBudget::zero()),
        (plus, DispersionBudget::from_gdd(-beta_z)),
    ]
}

/// Δτ = τ₊₁ − τ₀ for each case at a common |βz|.
pub fn mixture_case_widths(spec: &MixtureSpec, beta_z: f64) -> MixtureCaseWidths {
    let width = |(a1, a2): (DispersionBudget, DispersionBudget)| {
        mixture_peak_delay(spec, 1, &a1, &a2) - mixture_peak_delay(spec, 0, &a1, &a2)
    };
    let [pp, pz, pm] = mixture_cases(beta_z);
    MixtureCaseWidths {
        plus_plus: width(pp),
        plus_zero: width(pz),
        plus_minus: width(pm),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureHistogram {
    pub correlation: CorrelationFunction,
    pub fwhm: f64,
    /// Exact FWHM of one pulse pair with the same budgets.
    pub single_pair_fwhm: f64,
    /// Large-dispersion single-pair FWHM (the classical floor).
    pub floor_fwhm: f64,
    /// fwhm ≥ floor_fwhm − one grid step.
    pub above_floor: bool,
}

/// Σ_m w(m)·N(τ; τ_m, σ₁² + σ₂²) with weights normalized to unit sum.
pub fn mixture_histogram(
    spec: &MixtureSpec,
    arm1: &DispersionBudget,
    arm2: &DispersionBudget,
    taus: &DelayGrid,
) -> Result<MixtureHistogram> {
    let sigma0 = spec.pulse_bandwidth;
    let s2 = sigma0 * sigma0;
    let variance = 2.0 * s2 * (1.0 / (2.0 * s2 * s2) + arm1.total_gdd.powi(2) + arm2.total_gdd.powi(2));
    let components: Vec<(f64, f64)> = spec
        .indices()
        .map(|m| (mixture_peak_delay(spec, m, arm1, arm2), spec.weight(m)))
        .collect();
    let total: f64 = components.iter().map(|(_, w)| w).sum();
    let norm = 1.0 / (total * (2.0 * PI * variance).sqrt());
    let values = Exec::default().map_range(taus.len(), |j| {
        let tau = taus.at(j);
        components
            .iter()
            .map(|(c, w)| {
                let d = tau - c;
                w * (-d * d / (2.0 * variance)).exp()
            })
            .sum::<f64>()
            * norm
    });
    let correlation = CorrelationFunction::new(*taus, values)?;
    let fwhm = correlation.fwhm()?;
    let single_pair_fwhm = FWHM_PER_SIGMA * variance.sqrt();
    let floor_fwhm = 4.0 * std::f64::consts::LN_2.sqrt() * sigma0 * (arm1.total_gdd.powi(2) + arm2.total_gdd.powi(2)).sqrt();
    Ok(MixtureHistogram {
        above_floor: fwhm >= floor_fwhm - taus.step(),
        correlation,
        fwhm,
        single_pair_fwhm,
        floor_fwhm,
    })
}
