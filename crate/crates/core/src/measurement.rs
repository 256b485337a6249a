//! The measurement chain: monochromator slices and aperture clipping on the
//! spectral amplitude, timing-jitter convolution, photon-counting histograms
//! and Gaussian fits.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use nalgebra::{Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::curve::{half_max_crossings, CorrelationFunction, DelayGrid};
use crate::dispersion::DispersionBudget;
use crate::error::{require_finite, require_positive, MomentEstimate};
use crate::exec::Exec;
use crate::quantum::{g2_numeric_with, G2Options};
use crate::spectral::{angular_frequency, JointSpectralAmplitude, PhaseMatching};
use crate::{Error, Result, FWHM_PER_SIGMA, SPEED_OF_LIGHT};

/// Transmitted energy fraction below which a filter counts as disjoint from the JSA.
pub const DISJOINT_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    Gaussian,
    Rectangular,
}

/// Bandpass described by its power-transmission FWHM in wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    pub center_wavelength: f64,
    pub passband_fwhm: f64,
    pub shape: FilterShape,
}

impl SpectralFilter {
    pub fn new(center_wavelength: f64, passband_fwhm: f64, shape: FilterShape) -> Result<Self> {
        require_positive("filter center wavelength", center_wavelength)?;
        require_positive("filter passband", passband_fwhm)?;
        Ok(Self {
            center_wavelength,
            passband_fwhm,
            shape,
        })
    }

    pub fn center_angular(&self) -> f64 {
        angular_frequency(self.center_wavelength)
    }

    /// Passband in angular frequency, 2πcΔλ/λ².
    pub fn passband_angular(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT * self.passband_fwhm / (self.center_wavelength * self.center_wavelength)
    }

    /// Field transmission at angular frequency ω.
    pub fn amplitude(&self, omega: f64) -> f64 {
        let w = self.passband_angular();
        let d = omega - self.center_angular();
        match self.shape {
            FilterShape::Gaussian => (-2.0 * LN_2 * d * d / (w * w)).exp(),
            FilterShape::Rectangular => {
                if d.abs() <= w / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Which photon of the pair a filter acts on. The JSA detuning ν is the
/// signal's; the idler sits at Ω₂ − ν.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Signal,
    Idler,
}

impl Arm {
    fn sign(self) -> f64 {
        match self {
            Arm::Signal => 1.0,
            Arm::Idler => -1.0,
        }
    }

    pub fn center(self, pm: &PhaseMatching) -> f64 {
        match self {
            Arm::Signal => pm.center_signal(),
            Arm::Idler => pm.center_idler(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredJsa {
    pub jsa: JointSpectralAmplitude,
    /// Output energy / input energy.
    pub transmitted_fraction: f64,
    /// Set when the filter passes (almost) nothing of the JSA.
    pub disjoint: bool,
    /// Filter centre expressed in the JSA detuning ν.
    pub center_detuning: f64,
}

/// Multiplies S(ν) by the filter amplitude at the arm's optical frequency
/// `center + ν` (signal) or `center − ν` (idler).
pub fn apply_filter(jsa: &JointSpectralAmplitude, filter: &SpectralFilter, center: f64, arm: Arm) -> Result<FilteredJsa> {
    require_positive("arm center frequency", center)?;
    let s = arm.sign();
    let out = jsa.windowed(|nu| filter.amplitude(center + s * nu));
    let e_in = jsa.energy();
    let transmitted_fraction = if e_in > 0.0 { out.energy() / e_in } else { 0.0 };
    Ok(FilteredJsa {
        jsa: out,
        transmitted_fraction,
        disjoint: transmitted_fraction < DISJOINT_FRACTION,
        center_detuning: s * (filter.center_angular() - center),
    })
}

/// Aperture bandwidth clipping; the same window product as [`apply_filter`].
pub fn clip_bandwidth(jsa: &JointSpectralAmplitude, window: &SpectralFilter, center: f64, arm: Arm) -> Result<FilteredJsa> {
    apply_filter(jsa, window, center, arm)
}

/// Gaussian timing jitter of the detection system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResponse {
    pub fwhm: f64,
}

impl InstrumentResponse {
    pub fn new(fwhm: f64) -> Result<Self> {
        require_finite("instrument response fwhm", fwhm)?;
        if fwhm < 0.0 {
            return Err(Error::invalid("instrument response fwhm", format!("must be >= 0, got {fwhm}")));
        }
        Ok(Self { fwhm })
    }

    pub fn none() -> Self {
        Self { fwhm: 0.0 }
    }
}

/// Gaussian quadrature subtraction √(measured² − irf²).
pub fn deconvolve_quadrature(measured_fwhm: f64, irf: &InstrumentResponse) -> Result<f64> {
    require_positive("measured fwhm", measured_fwhm)?;
    if irf.fwhm >= measured_fwhm {
        return Err(Error::invalid(
            "measured fwhm",
            format!("{measured_fwhm:e} s does not exceed the instrument response {:e} s", irf.fwhm),
        ));
    }
    Ok((measured_fwhm * measured_fwhm - irf.fwhm * irf.fwhm).sqrt())
}

pub fn convolve_irf(corr: &CorrelationFunction, irf: &InstrumentResponse) -> Result<CorrelationFunction> {
    convolve_irf_with(corr, irf, Exec::default())
}

/// Discrete convolution with a unit-sum Gaussian kernel truncated at ±6σ;
/// samples beyond the grid count as zero.
pub fn convolve_irf_with(corr: &CorrelationFunction, irf: &InstrumentResponse, exec: Exec) -> Result<CorrelationFunction> {
    if irf.fwhm == 0.0 {
        return Ok(corr.clone());
    }
    let step = corr.grid().step();
    let limit = irf.fwhm / 8.0;
    if step >= limit {
        return Err(Error::IrfUndersampled { step, limit });
    }
    let sigma = irf.fwhm / FWHM_PER_SIGMA / step;
    let half = (6.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-half..=half).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = raw.iter().sum();
    let kernel: Vec<f64> = raw.iter().map(|w| w / norm).collect();
    let input = corr.values();
    let n = input.len() as i64;
    let values = exec.map_range(input.len(), |i| {
        let i = i as i64;
        let lo = (i - half).max(0);
        let hi = (i + half).min(n - 1);
        (lo..=hi).map(|j| kernel[(j - i + half) as usize] * input[j as usize]).sum::<f64>()
    });
    let out = CorrelationFunction::new(*corr.grid(), values)?;
    Ok(match corr.normalization() {
        crate::curve::Normalization::PeakOne => out.peak_one(),
        crate::curve::Normalization::Unnormalized => out,
    })
}

/// Photon-counting histogram; bin k covers [origin + k·w, origin + (k+1)·w).
#[derive(Debug, Clone, PartialEq)]
pub struct TcspcHistogram {
    pub bin_width: f64,
    pub origin: f64,
    pub counts: Vec<u64>,
    pub seed: u64,
}

impl TcspcHistogram {
    pub fn bin_start(&self, k: usize) -> f64 {
        self.origin + self.bin_width * k as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts placed at bin centres.
    pub fn as_curve(&self) -> Result<CorrelationFunction> {
        let grid = DelayGrid::new(self.origin + self.bin_width / 2.0, self.bin_width, self.counts.len())?;
        CorrelationFunction::new(grid, self.counts.iter().map(|c| *c as f64).collect())
    }

    /// CSV `bin_start_s,counts`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.counts.len() * 24);
        out.push_str("bin_start_s,counts\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{:e},{c}", self.bin_start(k));
        }
        out
    }
}

/// ∫ of the piecewise-linear interpolant of `corr` over each bin.
pub fn bin_masses(corr: &CorrelationFunction, bin_width: f64) -> Result<(f64, Vec<f64>)> {
    require_positive("bin width", bin_width)?;
    let grid = corr.grid();
    let nbins = (grid.span() / bin_width * (1.0 + 1e-12)).floor() as usize;
    if nbins == 0 {
        return Err(Error::invalid("bin width", format!("{bin_width:e} s exceeds the curve span {:e} s", grid.span())));
    }
    let v = corr.values();
    let mut cumulative = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * grid.step();
        cumulative.push(acc);
    }
    let integral_to = |x: f64| {
        let u = ((x - grid.start()) / grid.step()).clamp(0.0, (v.len() - 1) as f64);
        let i = (u.floor() as usize).min(v.len() - 2);
        let f = u - i as f64;
        let vx = v[i] + (v[i + 1] - v[i]) * f;
        cumulative[i] + 0.5 * (v[i] + vx) * f * grid.step()
    };
    let masses = (0..nbins)
        .map(|k| {
            let a = grid.start() + bin_width * k as f64;
            (integral_to(a + bin_width) - integral_to(a)).max(0.0)
        })
        .collect();
    Ok((grid.start(), masses))
}

/// Multinomial draw of `total_counts` over bins in proportion to the binned
/// mass of `corr`, as a chain of binomials from a ChaCha8 stream.
pub fn simulate_tcspc(corr: &CorrelationFunction, total_counts: u64, bin_width: f64, seed: u64) -> Result<TcspcHistogram> {
    let (origin, masses) = bin_masses(corr, bin_width)?;
    let total_mass: f64 = masses.iter().sum();
    if !(total_mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; masses.len()];
    let mut remaining = total_counts;
    let mut remaining_mass = total_mass;
    for (k, m) in masses.iter().enumerate() {
        if remaining == 0 || remaining_mass <= 0.0 {
            break;
        }
        let p = if k + 1 == masses.len() { 1.0 } else { (m / remaining_mass).clamp(0.0, 1.0) };
        let n = Binomial::new(remaining, p)
            .map_err(|e| Error::invalid("binomial draw", e.to_string()))?
            .sample(&mut rng);
        counts[k] = n;
        remaining -= n;
        remaining_mass -= m;
    }
    Ok(TcspcHistogram {
        bin_width,
        origin,
        counts,
        seed,
    })
}

/// Samples above half maximum required by [`fit_gaussian_fwhm`].
pub const MIN_FIT_SAMPLES: usize = 8;
const MAX_FIT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub fwhm: f64,
    pub center: f64,
    /// One-standard-error uncertainty of the FWHM.
    pub uncertainty: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl GaussianFit {
    /// Key-value report `fwhm_s`, `center_s`, `uncertainty_s`, `converged`.
    pub fn report(&self) -> String {
        format!(
            "fwhm_s={:e}\ncenter_s={:e}\nuncertainty_s={:e}\nconverged={}\n",
            self.fwhm, self.center, self.uncertainty, self.converged
        )
    }
}

fn moment_estimate(x0: f64, dx: f64, v: &[f64]) -> MomentEstimate {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (i, y) in v.iter().enumerate() {
        let p = y - min;
        let x = x0 + dx * i as f64;
        w += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let (center, fwhm) = if w > 0.0 {
        let c = m1 / w;
        (c, FWHM_PER_SIGMA * (m2 / w - c * c).max(0.0).sqrt())
    } else {
        (x0 + dx * (v.len() - 1) as f64 / 2.0, dx * (v.len() - 1) as f64)
    };
    MomentEstimate {
        fwhm,
        center,
        amplitude: max - min,
        baseline: min,
    }
}

/// Least-squares fit of A·exp(−(τ − c)²/2s²) + b, Levenberg–Marquardt in
/// coordinates scaled by the initial width and the peak height.
pub fn fit_gaussian_fwhm(curve: &CorrelationFunction) -> Result<GaussianFit> {
    let grid = curve.grid();
    let v = curve.values();
    let estimate = moment_estimate(grid.start(), grid.step(), v);
    let ys = v.iter().copied().fold(0.0, f64::max);
    if !(estimate.amplitude > 1e-12 * ys) {
        return Err(Error::FitNotConverged { iterations: 0, estimate });
    }
    let half = estimate.baseline + estimate.amplitude / 2.0;
    let found = v.iter().filter(|y| **y > half).count();
    if found < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            found,
            required: MIN_FIT_SAMPLES,
        });
    }
    let shifted: Vec<f64> = v.iter().map(|y| y - estimate.baseline).collect();
    let (x0, xs) = match half_max_crossings(grid.start(), grid.step(), &shifted) {
        Ok(c) => ((c.left + c.right) / 2.0, c.width()),
        Err(_) => (estimate.center, estimate.fwhm),
    };
    if !(xs > 0.0) {
        return Err(Error::FitNotConverged { iterations: 0, estimate });
    }
    let xs_data: Vec<f64> = grid.iter().map(|t| (t - x0) / xs).collect();
    let ys_data: Vec<f64> = v.iter().map(|y| y / ys).collect();

    let ssr_of = |p: &Vector4<f64>| -> f64 {
        xs_data
            .iter()
            .zip(&ys_data)
            .map(|(x, y)| {
                let d = x - p[1];
                let r = y - (p[0] * (-d * d / (2.0 * p[2] * p[2])).exp() + p[3]);
                r * r
            })
            .sum()
    };
    let normal_equations = |p: &Vector4<f64>| -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (x, y) in xs_data.iter().zip(&ys_data) {
            let d = x - p[1];
            let s2 = p[2] * p[2];
            let e = (-d * d / (2.0 * s2)).exp();
            let r = y - (p[0] * e + p[3]);
            let j = Vector4::new(e, p[0] * e * d / s2, p[0] * e * d * d / (s2 * p[2]), 1.0);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        (jtj, jtr)
    };

    let mut p = Vector4::new(
        estimate.amplitude / ys,
        0.0,
        1.0 / FWHM_PER_SIGMA,
        estimate.baseline / ys,
    );
    let mut ssr = ssr_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&p);
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + delta;
            trial[2] = trial[2].abs();
            let trial_ssr = ssr_of(&trial);
            if trial_ssr.is_finite() && trial_ssr < ssr {
                let small_step = delta.amax() < 1e-12;
                let small_gain = ssr - trial_ssr <= 1e-15 * ssr.max(1e-300);
                p = trial;
                ssr = trial_ssr;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no descent direction left at any damping: a stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !(p.iter().all(|x| x.is_finite()) && p[2] > 0.0 && p[0] > 0.0) {
        return Err(Error::FitNotConverged { iterations, estimate });
    }

    let dof = ys_data.len().saturating_sub(4).max(1) as f64;
    let (jtj, _) = normal_equations(&p);
    let var_s = jtj.try_inverse().map(|c| c[(2, 2)] * ssr / dof).unwrap_or(f64::NAN);
    Ok(GaussianFit {
        fwhm: FWHM_PER_SIGMA * p[2] * xs,
        center: x0 + p[1] * xs,
        uncertainty: FWHM_PER_SIGMA * var_s.max(0.0).sqrt() * xs,
        amplitude: p[0] * ys,
        baseline: p[3] * ys,
        converged,
        iterations,
    })
}

/// Everything a monochromator sweep needs besides the wavelengths.
#[derive(Debug, Clone)]
pub struct SliceSetup<'a> {
    pub jsa: &'a JointSpectralAmplitude,
    pub phase_matching: &'a PhaseMatching,
    pub arm1: DispersionBudget,
    pub arm2: DispersionBudget,
    pub arm: Arm,
    pub passband_fwhm: f64,
    pub shape: FilterShape,
    pub irf: InstrumentResponse,
    pub delays: DelayGrid,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePeak {
    pub wavelength: f64,
    /// Detuning of the slice centre from the filtered arm's centre frequency.
    pub detuning: f64,
    pub peak_delay: f64,
    pub fwhm: f64,
    pub transmitted_fraction: f64,
    /// Slice carried (almost) no energy and has no peak.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSweep {
    pub slices: Vec<SlicePeak>,
    /// Least-squares slope of peak delay against detuning, when ≥ 2 slices survive.
    pub slope: Option<f64>,
}

impl SliceSweep {
    /// |peak(a) − peak(b)| for two included wavelengths.
    pub fn spacing(&self, a: f64, b: f64) -> Option<f64> {
        let find = |w: f64| {
            self.slices
                .iter()
                .find(|s| !s.excluded && (s.wavelength - w).abs() <= 1e-6 * w)
        };
        Some((find(a)?.peak_delay - find(b)?.peak_delay).abs())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_m,detuning_rad_per_s,peak_delay_s,fwhm_s,transmitted_fraction,excluded\n");
        for s in &self.slices {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{}",
                s.wavelength, s.detuning, s.peak_delay, s.fwhm, s.transmitted_fraction, s.excluded
            );
        }
        out
    }
}

/// Filter → G² → IRF → fitted centre for every wavelength.
pub fn slice_peak_spacing(setup: &SliceSetup<'_>, wavelengths: &[f64]) -> Result<SliceSweep> {
    let center = setup.arm.center(setup.phase_matching);
    let opts = G2Options {
        exec: setup.exec,
        ..G2Options::default()
    };
    let slices = setup.exec.map_slice(wavelengths, |&wavelength| -> Result<SlicePeak> {
        let filter = SpectralFilter::new(wavelength, setup.passband_fwhm, setup.shape)?;
        let filtered = apply_filter(setup.jsa, &filter, center, setup.arm)?;
        let detuning = filter.center_angular() - center;
        if filtered.disjoint {
            return Ok(SlicePeak {
                wavelength,
                detuning,
                peak_delay: f64::NAN,
                fwhm: f64::NAN,
                transmitted_fraction: filtered.transmitted_fraction,
                excluded: true,
            });
        }
        let g2 = g2_numeric_with(&filtered.jsa, &setup.arm1, &setup.arm2, &setup.delays, &opts)?;
        let measured = convolve_irf_with(&g2.correlation, &setup.irf, setup.exec)?;
        let fit = fit_gaussian_fwhm(&measured)?;
        Ok(SlicePeak {
            wavelength,
            detuning,
            peak_delay: fit.center,
            fwhm: fit.fwhm,
            transmitted_fraction: filtered.transmitted_fraction,
            excluded: false,
        })
    });
    let slices = slices.into_iter().collect::<Result<Vec<_>>>()?;
    let included: Vec<(f64, f64)> = slices
        .iter()
        .filter(|s| !s.excluded)
        .map(|s| (s.detuning, s.peak_delay))
        .collect();
    let slope = (included.len() >= 2).then(|| {
        let n = included.len() as f64;
        let mx = included.iter().map(|p| p.0).sum::<f64>() / n;
        let my = included.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = included.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = included.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        sxy / sxx
    });
    Ok(SliceSweep { slices, slope })
}
