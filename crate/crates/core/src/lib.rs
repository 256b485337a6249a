//! Two-photon correlation under dispersive propagation.
//!
//! Frequency-anticorrelated photon pairs from a monochromatically pumped
//! type-I crystal acquire the *sum* of the quadratic spectral phases of the
//! two arms, so a negative group-delay dispersion in one arm can undo a
//! positive one in the other. This crate evaluates that correlation
//! function numerically and in closed form, models the measurement chain
//! (monochromator slices, bandwidth clipping, timing jitter, photon-counting
//! histograms, Gaussian fits) and the classical baselines that cannot
//! reproduce the cancellation.
//!
//! Heavy loops run through [`exec::Exec`], which is rayon-backed when the
//! `parallel` feature is enabled (the default) and sequential otherwise.

pub mod classical;
pub mod curve;
pub mod dispersion;
mod error;
pub mod exec;
pub mod measurement;
pub mod quantum;
pub mod report;
pub mod reproduce;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};

/// Vacuum speed of light, m/s (exact by definition of the metre).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 2√(2 ln 2): FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
