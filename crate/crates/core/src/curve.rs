//! Sampled curves on uniform delay grids and their width measures.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive};
use crate::{Error, Result};

/// Uniform, increasing grid of delays τ = t₁ − t₂ (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl DelayGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        require_finite("delay grid start", start)?;
        require_positive("delay grid step", step)?;
        if len < 2 {
            return Err(Error::invalid("delay grid length", format!("need at least 2 samples, got {len}")));
        }
        Ok(Self { start, step, len })
    }

    /// `len` samples spaced `step` apart, centred on `center`.
    pub fn centered(center: f64, step: f64, len: usize) -> Result<Self> {
        let start = center - step * (len as f64 - 1.0) / 2.0;
        Self::new(start, step, len)
    }

    /// Grid from `start` to `stop` inclusive; `stop` is rounded to a whole number of steps.
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        require_finite("delay grid stop", stop)?;
        require_positive("delay grid step", step)?;
        if stop <= start {
            return Err(Error::invalid("delay grid", format!("stop {stop} must exceed start {start}")));
        }
        let len = ((stop - start) / step).round() as usize + 1;
        Self::new(start, step, len)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn stop(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn span(&self) -> f64 {
        self.step * (self.len - 1) as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.at(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Unnormalized,
    PeakOne,
}

/// Real nonnegative density sampled on a [`DelayGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    grid: DelayGrid,
    values: Vec<f64>,
    normalization: Normalization,
}

impl CorrelationFunction {
    pub fn new(grid: DelayGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "correlation values",
                format!("{} values for {} delays", values.len(), grid.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid("correlation values", format!("must be finite and >= 0, found {v}")));
        }
        Ok(Self {
            grid,
            values,
            normalization: Normalization::Unnormalized,
        })
    }

    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.iter()
    }

    pub fn peak_index(&self) -> usize {
        argmax(&self.values)
    }

    pub fn peak_delay(&self) -> f64 {
        self.grid.at(self.peak_index())
    }

    pub fn peak_value(&self) -> f64 {
        self.values[self.peak_index()]
    }

    /// Riemann mass Σ values · step.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.step()
    }

    /// Copy scaled so the largest sample is 1. A zero curve is returned unchanged.
    pub fn peak_one(&self) -> Self {
        let peak = self.peak_value();
        let values = if peak > 0.0 {
            self.values.iter().map(|v| v / peak).collect()
        } else {
            self.values.clone()
        };
        Self {
            grid: self.grid,
            values,
            normalization: Normalization::PeakOne,
        }
    }

    pub fn fwhm(&self) -> Result<f64> {
        Ok(half_max_crossings(self.grid.start(), self.grid.step(), &self.values)?.width())
    }

    /// Two-column CSV `tau_s,value`, shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 32);
        out.push_str("tau_s,value\n");
        for (tau, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{tau:e},{v:e}");
        }
        out
    }
}

/// Positions where a sampled peak crosses half its maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfMaxCrossings {
    pub left: f64,
    pub right: f64,
    pub peak: f64,
}

impl HalfMaxCrossings {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Walks outwards from the global maximum to the first samples below half of
/// it and linearly interpolates each crossing.
pub fn half_max_crossings(x0: f64, dx: f64, values: &[f64]) -> Result<HalfMaxCrossings> {
    if values.is_empty() {
        return Err(Error::NoHalfMaximum { side: "left" });
    }
    let ip = argmax(values);
    let peak = values[ip];
    let half = peak / 2.0;
    if !(peak > 0.0) {
        return Err(Error::NoHalfMaximum { side: "left" });
    }
    let x = |i: f64| x0 + dx * i;

    let mut i = ip;
    while i > 0 && values[i - 1] > half {
        i -= 1;
    }
    if i == 0 {
        return Err(Error::NoHalfMaximum { side: "left" });
    }
    let (lo, hi) = (values[i - 1], values[i]);
    let left = x((i - 1) as f64 + (half - lo) / (hi - lo));

    let mut j = ip;
    while j + 1 < values.len() && values[j + 1] > half {
        j += 1;
    }
    if j + 1 == values.len() {
        return Err(Error::NoHalfMaximum { side: "right" });
    }
    let (hi, lo) = (values[j], values[j + 1]);
    let right = x(j as f64 + (hi - half) / (hi - lo));

    Ok(HalfMaxCrossings { left, right, peak })
}
