//! Biphoton joint spectral amplitude and wavelength/detuning algebra.
//!
//! The pair is written as photon 1 at `Ω₁ + ν` and photon 2 at `Ω₂ − ν`; the
//! amplitude `S(ν)` is sampled on a symmetric [`DetuningGrid`]. Detunings are
//! angular frequencies (rad/s) everywhere.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::half_max_crossings;
use crate::error::require_positive;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Smallest accepted detuning grid.
pub const MIN_GRID_POINTS: usize = 1 << 8;

/// Default number of detuning samples.
pub const DEFAULT_GRID_POINTS: usize = 1 << 14;

/// Grids must span this many amplitude FWHMs of the JSA placed on them.
pub const GRID_FWHM_COVERAGE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    wavelength: f64,
}

impl PumpSpec {
    pub fn new(wavelength: f64) -> Result<Self> {
        require_positive("pump wavelength", wavelength)?;
        Ok(Self { wavelength })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}

/// Crystal and centre frequencies of a collinear type-I pair source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatching {
    crystal_length: f64,
    inverse_group_velocity_difference: f64,
    center_signal: f64,
    center_idler: f64,
}

impl PhaseMatching {
    /// `inverse_group_velocity_difference` is D = 1/u₂ − 1/u₁ in s/m; D·L must be positive.
    pub fn new(
        crystal_length: f64,
        inverse_group_velocity_difference: f64,
        center_signal: f64,
        center_idler: f64,
    ) -> Result<Self> {
        require_positive("crystal length", crystal_length)?;
        require_positive("inverse group velocity difference", inverse_group_velocity_difference)?;
        require_positive("signal centre frequency", center_signal)?;
        require_positive("idler centre frequency", center_idler)?;
        Ok(Self {
            crystal_length,
            inverse_group_velocity_difference,
            center_signal,
            center_idler,
        })
    }

    /// Centres from the pump and signal wavelengths; the idler is the energy-conserving partner.
    pub fn from_wavelengths(
        crystal_length: f64,
        inverse_group_velocity_difference: f64,
        pump: PumpSpec,
        signal_wavelength: f64,
    ) -> Result<Self> {
        let idler = conjugate_wavelength(signal_wavelength, pump)?;
        Self::new(
            crystal_length,
            inverse_group_velocity_difference,
            angular_frequency(signal_wavelength),
            angular_frequency(idler),
        )
    }

    pub fn crystal_length(&self) -> f64 {
        self.crystal_length
    }

    pub fn inverse_group_velocity_difference(&self) -> f64 {
        self.inverse_group_velocity_difference
    }

    pub fn center_signal(&self) -> f64 {
        self.center_signal
    }

    pub fn center_idler(&self) -> f64 {
        self.center_idler
    }

    /// D·L, the walk-off time across the crystal (s).
    pub fn walkoff(&self) -> f64 {
        self.crystal_length * self.inverse_group_velocity_difference
    }

    /// γD²L², the transform-limited temporal variance of the Gaussian model (s²).
    pub fn gaussian_variance(&self, gamma: f64) -> f64 {
        let dl = self.walkoff();
        gamma * dl * dl
    }
}

/// Symmetric uniform detuning grid: νᵢ = (i − (N−1)/2)·Δν, so ν₍N−1−i₎ = −νᵢ exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningGrid {
    half_span: f64,
    samples: Vec<f64>,
}

impl DetuningGrid {
    pub fn new(half_span: f64, point_count: usize) -> Result<Self> {
        require_positive("grid half span", half_span)?;
        if point_count < MIN_GRID_POINTS || !point_count.is_power_of_two() {
            return Err(Error::invalid(
                "grid point count",
                format!("must be a power of two >= {MIN_GRID_POINTS}, got {point_count}"),
            ));
        }
        let step = 2.0 * half_span / (point_count - 1) as f64;
        let mid = (point_count - 1) as f64 / 2.0;
        let samples = (0..point_count).map(|i| (i as f64 - mid) * step).collect();
        Ok(Self { half_span, samples })
    }

    /// Grid spanning [`GRID_FWHM_COVERAGE`] times `amplitude_fwhm`.
    pub fn covering(amplitude_fwhm: f64, point_count: usize) -> Result<Self> {
        require_positive("amplitude FWHM", amplitude_fwhm)?;
        Self::new(GRID_FWHM_COVERAGE * amplitude_fwhm / 2.0, point_count)
    }

    pub fn half_span(&self) -> f64 {
        self.half_span
    }

    pub fn point_count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_span / (self.samples.len() - 1) as f64
    }

    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    fn check_coverage(&self, amplitude_fwhm: f64) -> Result<()> {
        let span = 2.0 * self.half_span;
        if span < GRID_FWHM_COVERAGE * amplitude_fwhm * (1.0 - 1e-9) {
            return Err(Error::GridTooNarrow {
                span,
                fwhm: amplitude_fwhm,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SpectralModel {
    Sinc,
    Gaussian { gamma: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    grid: DetuningGrid,
    values: Vec<Complex64>,
    model: SpectralModel,
}

impl JointSpectralAmplitude {
    /// Arbitrary sampled amplitude; tagged [`SpectralModel::Custom`].
    pub fn custom(grid: DetuningGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.point_count() {
            return Err(Error::invalid(
                "JSA values",
                format!("{} values for {} grid points", values.len(), grid.point_count()),
            ));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("JSA values", "must be finite"));
        }
        Ok(Self {
            grid,
            values,
            model: SpectralModel::Custom,
        })
    }

    pub fn grid(&self) -> &DetuningGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn model(&self) -> SpectralModel {
        self.model
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.model {
            SpectralModel::Gaussian { gamma } => Some(gamma),
            _ => None,
        }
    }

    /// Σ|S|²Δν.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    /// FWHM of |S(ν)| measured on the grid (rad/s).
    pub fn amplitude_fwhm(&self) -> Result<f64> {
        let mags: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        Ok(half_max_crossings(self.grid.first(), self.grid.spacing(), &mags)?.width())
    }

    /// Centroid and variance of |S|² in ν.
    pub fn intensity_moments(&self) -> (f64, f64) {
        let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (nu, v) in self.grid.samples().iter().zip(&self.values) {
            let p = v.norm_sqr();
            w += p;
            m1 += p * nu;
            m2 += p * nu * nu;
        }
        if w == 0.0 {
            return (0.0, 0.0);
        }
        let mean = m1 / w;
        (mean, (m2 / w - mean * mean).max(0.0))
    }

    /// Pointwise product with a real window evaluated at each detuning.
    pub(crate) fn windowed(&self, window: impl Fn(f64) -> f64) -> Self {
        let values = self
            .grid
            .samples()
            .iter()
            .zip(&self.values)
            .map(|(nu, v)| v * window(*nu))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            model: SpectralModel::Custom,
        }
    }
}

/// sin(x)/x with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Positive root of sin(x) = x/2: the half-amplitude point of sinc(x).
pub fn sinc_half_amplitude_root() -> f64 {
    let f = |x: f64| x.sin() - x / 2.0;
    let (mut lo, mut hi) = (1.0_f64, 2.5_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Amplitude FWHM of sinc(νDL/2) in ν (rad/s).
pub fn sinc_amplitude_fwhm(pm: &PhaseMatching) -> f64 {
    4.0 * sinc_half_amplitude_root() / pm.walkoff()
}

/// Amplitude FWHM of exp(−γ(νDL)²) in ν (rad/s).
pub fn gaussian_amplitude_fwhm(pm: &PhaseMatching, gamma: f64) -> f64 {
    2.0 * (LN_2 / gamma).sqrt() / pm.walkoff()
}

pub fn sinc_profile(pm: &PhaseMatching, nu: f64) -> f64 {
    sinc(nu * pm.walkoff() / 2.0)
}

pub fn gaussian_profile(pm: &PhaseMatching, gamma: f64, nu: f64) -> f64 {
    let u = nu * pm.walkoff();
    (-gamma * u * u).exp()
}

/// S(ν) = sinc(νDL/2), side lobes kept with their sign.
pub fn sinc_jsa(pm: &PhaseMatching, grid: &DetuningGrid) -> Result<JointSpectralAmplitude> {
    let lobe = 4.0 * PI / pm.walkoff();
    let points_across_lobe = lobe / grid.spacing();
    if points_across_lobe < 16.0 {
        return Err(Error::GridTooCoarse { points_across_lobe });
    }
    grid.check_coverage(sinc_amplitude_fwhm(pm))?;
    let values = grid
        .samples()
        .iter()
        .map(|nu| Complex64::new(sinc_profile(pm, *nu), 0.0))
        .collect();
    Ok(JointSpectralAmplitude {
        grid: grid.clone(),
        values,
        model: SpectralModel::Sinc,
    })
}

/// S(ν) = exp(−γ(νDL)²).
pub fn gaussian_jsa(pm: &PhaseMatching, gamma: f64, grid: &DetuningGrid) -> Result<JointSpectralAmplitude> {
    require_positive("gamma", gamma)?;
    grid.check_coverage(gaussian_amplitude_fwhm(pm, gamma))?;
    let values = grid
        .samples()
        .iter()
        .map(|nu| Complex64::new(gaussian_profile(pm, gamma, *nu), 0.0))
        .collect();
    Ok(JointSpectralAmplitude {
        grid: grid.clone(),
        values,
        model: SpectralModel::Gaussian { gamma },
    })
}

/// γ for which exp(−γu²) and sinc(u/2) share their amplitude FWHM.
pub fn match_gamma() -> f64 {
    let x = sinc_half_amplitude_root();
    LN_2 / (4.0 * x * x)
}

/// ω = 2πc/λ.
pub fn angular_frequency(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

/// λ₂ = λp·λ₁/(λ₁ − λp).
pub fn conjugate_wavelength(lambda_signal: f64, pump: PumpSpec) -> Result<f64> {
    require_positive("signal wavelength", lambda_signal)?;
    let lp = pump.wavelength();
    if lambda_signal <= lp {
        return Err(Error::NoConjugate {
            signal: lambda_signal,
            pump: lp,
        });
    }
    Ok(lp * lambda_signal / (lambda_signal - lp))
}

/// ν = 2πc/λ − Ω.
pub fn wavelength_to_detuning(lambda: f64, center: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    angular_frequency(lambda) - center
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const NM: f64 = 1e-9;

    fn reference_pm() -> PhaseMatching {
        // D·L = 88.9 fs across a 3 mm crystal
        let pump = PumpSpec::new(408.2 * NM).unwrap();
        PhaseMatching::from_wavelengths(3e-3, 88.9e-15 / 3e-3, pump, 896.0 * NM).unwrap()
    }

    fn grid_for(pm: &PhaseMatching) -> DetuningGrid {
        DetuningGrid::covering(sinc_amplitude_fwhm(pm), DEFAULT_GRID_POINTS).unwrap()
    }

    // Independent oracle: Newton iteration on sin(x) − x/2 from a different start.
    fn newton_half_root() -> f64 {
        let mut x = 2.0_f64;
        for _ in 0..50 {
            x -= (x.sin() - x / 2.0) / (x.cos() - 0.5);
        }
        x
    }

    #[test]
    fn half_root_matches_newton() {
        assert_relative_eq!(sinc_half_amplitude_root(), newton_half_root(), max_relative = 1e-14);
        assert_relative_eq!(2.0 * sinc_half_amplitude_root(), 3.7910, max_relative = 1e-4);
    }

    #[test]
    fn sinc_examples() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-15);
        let u_half = 2.0 * newton_half_root();
        assert_relative_eq!(sinc(u_half / 2.0), 0.5, max_relative = 1e-12);
        assert_relative_eq!(sinc(3.7910 / 2.0), 0.5, epsilon = 1e-4);
    }

    #[test]
    fn gaussian_examples() {
        let pm = reference_pm();
        assert_eq!(gaussian_profile(&pm, 0.04822, 0.0), 1.0);
        let nu = 3.7910 / pm.walkoff();
        assert_relative_eq!(gaussian_profile(&pm, 0.04822, nu), 0.500, epsilon = 5e-4);
        assert!(gaussian_profile(&pm, 0.04822, 1e20) == 0.0);
    }

    #[test]
    fn matched_gamma_value() {
        let g = match_gamma();
        // root-find value, frozen from an independent Newton solve
        let x = newton_half_root();
        assert_relative_eq!(g, LN_2 / (2.0 * x).powi(2), max_relative = 1e-13);
        assert_relative_eq!(g, 0.048_230_36, max_relative = 1e-6);
        // quoted 0.04822 is the truncated value of the same root
        assert_relative_eq!(g, 0.04822, max_relative = 3e-4);
    }

    #[test]
    fn doubling_target_width_quarters_gamma() {
        let pm = reference_pm();
        let g = match_gamma();
        let w = gaussian_amplitude_fwhm(&pm, g);
        assert_relative_eq!(gaussian_amplitude_fwhm(&pm, g / 4.0), 2.0 * w, max_relative = 1e-14);
    }

    #[test]
    fn matched_fwhms_agree() {
        let pm = reference_pm();
        let g = match_gamma();
        assert_relative_eq!(gaussian_amplitude_fwhm(&pm, g), sinc_amplitude_fwhm(&pm), max_relative = 1e-9);
        let half = sinc_amplitude_fwhm(&pm) / 2.0;
        for nu in [0.0, half, -half] {
            assert!((gaussian_profile(&pm, g, nu) - sinc_profile(&pm, nu)).abs() < 1e-6);
        }
    }

    #[test]
    fn model_jsas_are_even_and_real() {
        let pm = reference_pm();
        let grid = grid_for(&pm);
        for jsa in [sinc_jsa(&pm, &grid).unwrap(), gaussian_jsa(&pm, match_gamma(), &grid).unwrap()] {
            let v = jsa.values();
            let n = v.len();
            for i in 0..n / 2 {
                assert_eq!(v[i], v[n - 1 - i]);
                assert_eq!(v[i].im, 0.0);
            }
        }
    }

    #[test]
    fn sampled_fwhm_matches_model() {
        let pm = reference_pm();
        let grid = grid_for(&pm);
        let s = sinc_jsa(&pm, &grid).unwrap();
        let g = gaussian_jsa(&pm, match_gamma(), &grid).unwrap();
        let expected = sinc_amplitude_fwhm(&pm);
        assert_relative_eq!(s.amplitude_fwhm().unwrap(), expected, max_relative = 1e-4);
        assert_relative_eq!(g.amplitude_fwhm().unwrap(), expected, max_relative = 1e-4);
    }

    #[test]
    fn coarse_grid_rejected() {
        let pm = reference_pm();
        let grid = DetuningGrid::new(1e16, MIN_GRID_POINTS).unwrap();
        assert!(matches!(sinc_jsa(&pm, &grid), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn narrow_grid_rejected() {
        let pm = reference_pm();
        let grid = DetuningGrid::new(1e13, DEFAULT_GRID_POINTS).unwrap();
        assert!(matches!(gaussian_jsa(&pm, 0.04822, &grid), Err(Error::GridTooNarrow { .. })));
    }

    #[test]
    fn grid_shape() {
        assert!(DetuningGrid::new(1.0, 1000).is_err());
        assert!(DetuningGrid::new(1.0, 128).is_err());
        let g = DetuningGrid::new(3.0e14, 1024).unwrap();
        let s = g.samples();
        assert_eq!(s[0], -s[1023]);
        assert_relative_eq!(s[1023], 3.0e14, max_relative = 1e-15);
        let d = g.spacing();
        assert!(s.windows(2).all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d));
    }

    #[test]
    fn conjugate_examples() {
        let pump = PumpSpec::new(408.2 * NM).unwrap();
        let l2 = conjugate_wavelength(896.0 * NM, pump).unwrap();
        assert_relative_eq!(l2, 749.8 * NM, max_relative = 1e-4);
        assert_relative_eq!(conjugate_wavelength(816.4 * NM, pump).unwrap(), 816.4 * NM, max_relative = 1e-14);
        assert_relative_eq!(conjugate_wavelength(l2, pump).unwrap(), 896.0 * NM, max_relative = 1e-14);
        assert!(matches!(conjugate_wavelength(400.0 * NM, pump), Err(Error::NoConjugate { .. })));
        assert!(conjugate_wavelength(408.2 * NM, pump).is_err());
    }

    #[test]
    fn detuning_examples() {
        let center = angular_frequency(750.0 * NM);
        assert!(wavelength_to_detuning(750.0 * NM, center).abs() < 1e-3);
        // 2πc(1/740 − 1/750) nm⁻¹ evaluated by hand: 3.39397e13
        assert_relative_eq!(wavelength_to_detuning(740.0 * NM, center), 3.393_967e13, max_relative = 1e-6);
        assert_relative_eq!(wavelength_to_detuning(760.0 * NM, center), -3.304_652e13, max_relative = 1e-6);
    }

    proptest! {
        #[test]
        fn conjugate_conserves_energy(lp in 300e-9..600e-9f64, excess in 1e-9..2e-6f64) {
            let pump = PumpSpec::new(lp).unwrap();
            let l1 = lp + excess;
            let l2 = conjugate_wavelength(l1, pump).unwrap();
            let lhs = 1.0 / l1 + 1.0 / l2;
            prop_assert!(((lhs - 1.0 / lp) * lp).abs() < 1e-12);
        }

        #[test]
        fn conjugate_is_involution(lp in 300e-9..600e-9f64, excess in 1e-8..2e-6f64) {
            let pump = PumpSpec::new(lp).unwrap();
            let l1 = lp + excess;
            let back = conjugate_wavelength(conjugate_wavelength(l1, pump).unwrap(), pump).unwrap();
            prop_assert!(((back - l1) / l1).abs() < 1e-9);
        }
    }
}
