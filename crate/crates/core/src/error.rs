use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Moment-based starting point of a Gaussian fit, carried by fit failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub fwhm: f64,
    pub center: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("detuning grid too coarse: {points_across_lobe:.1} points across the sinc main lobe (need 16)")]
    GridTooCoarse { points_across_lobe: f64 },

    #[error("detuning grid span {span:.4e} rad/s is less than 8x the amplitude FWHM {fwhm:.4e} rad/s")]
    GridTooNarrow { span: f64, fwhm: f64 },

    #[error("no energy-conserving partner: signal wavelength {signal:.6e} m must exceed pump wavelength {pump:.6e} m")]
    NoConjugate { signal: f64, pump: f64 },

    #[error("quadratic phase undersampled: max phase step {max_step:.3} rad exceeds pi/4; need at least {required_points} grid points")]
    PhaseUndersampled { max_step: f64, required_points: usize },

    #[error("delay grid spans {span:.4e} s, less than 4x the expected width {expected_fwhm:.4e} s")]
    DelayWindowTooShort { span: f64, expected_fwhm: f64 },

    #[error("instrument response undersampled: delay step {step:.4e} s must be below fwhm/8 = {limit:.4e} s")]
    IrfUndersampled { step: f64, limit: f64 },

    #[error("curve has no half-maximum crossing on the {side} side of its peak")]
    NoHalfMaximum { side: &'static str },

    #[error("only {found} samples above half maximum, need {required}")]
    TooFewSamples { found: usize, required: usize },

    #[error("gaussian fit did not converge after {iterations} iterations (moment estimate fwhm {:.4e} s)", estimate.fwhm)]
    FitNotConverged {
        iterations: usize,
        estimate: MomentEstimate,
    },

    #[error("correlation function carries no mass")]
    ZeroMass,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
