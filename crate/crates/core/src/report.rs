//! Pass/fail checks and plain-text reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// |value − target| ≤ rel_tol·|target|.
    pub fn within_rel(name: impl Into<String>, value: f64, target: f64, rel_tol: f64) -> Self {
        let rel = (value - target).abs() / target.abs();
        Self::new(
            name,
            rel <= rel_tol,
            format!("value {value:.6e}, target {target:.6e}, rel diff {rel:.3e} (tol {rel_tol:e})"),
        )
    }

    /// lo ≤ value ≤ hi.
    pub fn within_range(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            name,
            value >= lo && value <= hi,
            format!("value {value:.6e}, window [{lo:.6e}, {hi:.6e}]"),
        )
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

pub fn check_lines(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&c.line());
        out.push('\n');
    }
    out
}

/// `key=value` lines in the given order.
pub fn key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}
