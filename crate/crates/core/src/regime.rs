//! Predicted scaling regime of an aggregated input and its limit oracles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tail::{PositiveLaw, StableParams};
use crate::limit_fields::telecom_field_logchf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    Fbs,
    StableSheet,
    Intermediate,
}

impl LimitKind {
    pub const ALL: [LimitKind; 3] = [LimitKind::Fbs, LimitKind::StableSheet, LimitKind::Intermediate];

    pub fn name(self) -> &'static str {
        match self {
            LimitKind::Fbs => "fbs",
            LimitKind::StableSheet => "stable",
            LimitKind::Intermediate => "telecom",
        }
    }
}

/// Gaussian limit `C_W·B_{H₁,1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbsLimit {
    pub h1: f64,
    pub c_x: f64,
    /// `C_W² = c_X/((2H₁−1)H₁)`.
    pub c_w2: f64,
}

impl FbsLimit {
    pub fn new(h1: f64, c_x: f64) -> Self {
        FbsLimit {
            h1,
            c_x,
            c_w2: c_x / ((2.0 * h1 - 1.0) * h1),
        }
    }
}

/// Telecom limit `b·J(x, y)` with `ν(dr) = α·c·r^{−α−1}dr` and optional random amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelecomLimit {
    pub alpha: f64,
    pub intensity: f64,
    pub prefactor: f64,
    #[serde(default)]
    pub amplitude: Option<PositiveLaw>,
}

impl TelecomLimit {
    pub fn log_chf(&self, theta: f64, x: f64, y: f64) -> Result<Complex64> {
        let t = theta * self.prefactor;
        let v = match &self.amplitude {
            None => telecom_field_logchf(t, x, self.alpha, self.intensity)?,
            Some(PositiveLaw::Constant { value }) => telecom_field_logchf(t * value, x, self.alpha, self.intensity)?,
            Some(law) => {
                let re = law.expect(|a| telecom_field_logchf(t * a, x, self.alpha, self.intensity).map(|c| c.re).unwrap_or(f64::NAN))?;
                let im = law.expect(|a| telecom_field_logchf(t * a, x, self.alpha, self.intensity).map(|c| c.im).unwrap_or(f64::NAN))?;
                Complex64::new(re, im)
            }
        };
        Ok(v * y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub gamma: f64,
    pub gamma0: f64,
    /// Tail index of the stable regime.
    pub alpha: f64,
    pub h: f64,
    pub kind: LimitKind,
    pub fbs: Option<FbsLimit>,
    pub c_plus: Option<f64>,
    pub c_minus: Option<f64>,
    pub stable: Option<StableParams>,
    pub telecom: Option<TelecomLimit>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// `γ` within this distance of `γ₀` counts as the intermediate case.
pub const GAMMA_TIE: f64 = 1e-12;

pub fn kind_of(gamma: f64, gamma0: f64) -> LimitKind {
    if (gamma - gamma0).abs() <= GAMMA_TIE {
        LimitKind::Intermediate
    } else if gamma > gamma0 {
        LimitKind::Fbs
    } else {
        LimitKind::StableSheet
    }
}

impl RegimeSpec {
    /// Marginal log-ch.f. of the candidate limit `kind` at `(x, y)`.
    pub fn oracle_logchf(&self, kind: LimitKind, theta: f64, x: f64, y: f64) -> Option<Result<Complex64>> {
        match kind {
            LimitKind::Fbs => self.fbs.map(|f| {
                let v = f.c_w2 * x.powf(2.0 * f.h1) * y;
                Ok(Complex64::new(-0.5 * v * theta * theta, 0.0))
            }),
            LimitKind::StableSheet => self.stable.map(|s| Ok(s.scaled_area(x * y).log_chf(theta))),
            LimitKind::Intermediate => self.telecom.as_ref().map(|t| t.log_chf(theta, x, y)),
        }
    }

    /// Checks `0 ≤ H ≤ 1+γ`, and `0 ≤ H − γ/2 ≤ 1` for finite-variance limits.
    pub fn validate_h_range(&self) -> Result<()> {
        let tol = 1e-12;
        if self.h < -tol || self.h > 1.0 + self.gamma + tol {
            return Err(Error::Hypothesis(format!(
                "H = {} outside [0, 1+γ] at γ = {}",
                self.h, self.gamma
            )));
        }
        if self.kind != LimitKind::StableSheet {
            let h1 = self.h - self.gamma / 2.0;
            if h1 < -tol || h1 > 1.0 + tol {
                return Err(Error::Hypothesis(format!("H − γ/2 = {h1} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Piecewise H table: fast formula, value at γ₀, slow formula.
pub fn h_table(gamma: f64, gamma0: f64, fast: impl Fn(f64) -> f64, at: f64, slow: impl Fn(f64) -> f64) -> f64 {
    match kind_of(gamma, gamma0) {
        LimitKind::Fbs => fast(gamma),
        LimitKind::Intermediate => at,
        LimitKind::StableSheet => slow(gamma),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbs_constant() {
        let f = FbsLimit::new(0.75, 2.0);
        assert!((f.c_w2 - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kind_partition() {
        assert_eq!(kind_of(1.0, 0.5), LimitKind::Fbs);
        assert_eq!(kind_of(0.25, 0.5), LimitKind::StableSheet);
        assert_eq!(kind_of(0.5, 0.5), LimitKind::Intermediate);
    }
}
