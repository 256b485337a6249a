//! Lumped first- and second-order dispersion of each arm.
//!
//! An element contributes `α·z·ν + β·z·ν²` to the spectral phase of the
//! photon passing through it. Only the products are modelled.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive};
use crate::spectral::PhaseMatching;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersiveElement {
    pub name: String,
    /// α·z, group delay per unit detuning (s).
    pub group_delay_slope: f64,
    /// β·z, group-delay dispersion (s²).
    pub gdd: f64,
}

impl DispersiveElement {
    pub fn new(name: impl Into<String>, group_delay_slope: f64, gdd: f64) -> Result<Self> {
        require_finite("group delay slope", group_delay_slope)?;
        require_finite("gdd", gdd)?;
        Ok(Self {
            name: name.into(),
            group_delay_slope,
            gdd,
        })
    }

    pub fn fiber(gdd: f64) -> Result<Self> {
        Self::new("fiber", 0.0, gdd)
    }

    pub fn vacuum() -> Self {
        Self {
            name: "vacuum".into(),
            group_delay_slope: 0.0,
            gdd: 0.0,
        }
    }

    pub fn grating_pair(gp: &GratingPair, wavelength: f64) -> Result<Self> {
        Self::new("grating_pair", 0.0, grating_pair_gdd(gp, wavelength)?)
    }

    pub fn negated(&self) -> Self {
        Self {
            name: format!("-{}", self.name),
            group_delay_slope: -self.group_delay_slope,
            gdd: -self.gdd,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DispersionBudget {
    /// Σ α·z (s).
    pub total_delay_slope: f64,
    /// Σ β·z (s²).
    pub total_gdd: f64,
}

impl DispersionBudget {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_gdd(gdd: f64) -> Self {
        Self {
            total_delay_slope: 0.0,
            total_gdd: gdd,
        }
    }

    pub fn from_delay(delay_slope: f64) -> Self {
        Self {
            total_delay_slope: delay_slope,
            total_gdd: 0.0,
        }
    }
}

/// Parallel grating compressor, optionally double-passed via a retro mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingPair {
    groove_spacing: f64,
    separation: f64,
    diffracted_angle: f64,
    passes: u8,
}

impl GratingPair {
    pub const DEFAULT_PASSES: u8 = 2;

    pub fn new(groove_spacing: f64, separation: f64, diffracted_angle: f64, passes: u8) -> Result<Self> {
        require_positive("groove spacing", groove_spacing)?;
        require_finite("grating separation", separation)?;
        if separation < 0.0 {
            return Err(Error::invalid("grating separation", format!("must be >= 0, got {separation}")));
        }
        if !(diffracted_angle > 0.0 && diffracted_angle < PI / 2.0) {
            return Err(Error::invalid(
                "diffracted angle",
                format!("must lie in (0, pi/2) rad, got {diffracted_angle}"),
            ));
        }
        if !(1..=2).contains(&passes) {
            return Err(Error::invalid("passes", format!("must be 1 or 2, got {passes}")));
        }
        Ok(Self {
            groove_spacing,
            separation,
            diffracted_angle,
            passes,
        })
    }

    pub fn groove_spacing(&self) -> f64 {
        self.groove_spacing
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn diffracted_angle(&self) -> f64 {
        self.diffracted_angle
    }

    pub fn passes(&self) -> u8 {
        self.passes
    }

    pub fn with_passes(self, passes: u8) -> Result<Self> {
        Self::new(self.groove_spacing, self.separation, self.diffracted_angle, passes)
    }
}

/// passes · [−(λ/2πc²)(λ/d)(G/cos³θ′)]. The grating equation is not checked.
pub fn grating_pair_gdd(gp: &GratingPair, wavelength: f64) -> Result<f64> {
    require_positive("wavelength", wavelength)?;
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let single = -(wavelength / (2.0 * PI * c2))
        * (wavelength / gp.groove_spacing)
        * (gp.separation / gp.diffracted_angle.cos().powi(3));
    Ok(f64::from(gp.passes) * single)
}

/// GDD inferred from a measured broadened width by inverting the asymptotic FWHM law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberEstimate {
    pub gdd: f64,
    /// False when the result is not well above γD²L², where the law stops holding.
    pub asymptotic: bool,
}

/// Ratio |B|/γD²L² above which the broadened width is treated as asymptotic.
pub const ASYMPTOTIC_RATIO: f64 = 100.0;

/// 2√(2ln2/γD²L²): broadened FWHM per unit GDD in the asymptotic regime (1/s).
pub fn broadening_rate(pm: &PhaseMatching, gamma: f64) -> f64 {
    2.0 * (2.0 * LN_2 / pm.gaussian_variance(gamma)).sqrt()
}

/// β₁z₁ = Δt / 2√(2ln2/γD²L²).
pub fn fiber_gdd_from_measured_width(delta_t: f64, pm: &PhaseMatching, gamma: f64) -> Result<FiberEstimate> {
    require_positive("measured width", delta_t)?;
    require_positive("gamma", gamma)?;
    let gdd = delta_t / broadening_rate(pm, gamma);
    Ok(FiberEstimate {
        gdd,
        asymptotic: gdd > ASYMPTOTIC_RATIO * pm.gaussian_variance(gamma),
    })
}

/// Coefficient-wise sum; the result is the exactly rounded sum, so element order never matters.
pub fn combine(elements: &[DispersiveElement]) -> DispersionBudget {
    DispersionBudget {
        total_delay_slope: exact_sum(elements.iter().map(|e| e.group_delay_slope)),
        total_gdd: exact_sum(elements.iter().map(|e| e.gdd)),
    }
}

/// Correctly rounded floating-point sum (Shewchuk partials with a final half-way fix-up).
fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}
