use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inexactness tolerances `γ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ToleranceSchedule {
    /// `γ_k = 0`.
    Zero,
    /// Schedule A: `γ_k = ε / sqrt(k+1)`. Residuals reach `O(1/k) + O(ε)`.
    #[serde(rename = "a")]
    Sqrt { eps: f64 },
    /// Schedule B: `γ_k = (k+1)^{-a}` with `a > 3/2`, so that
    /// `Σ (k+1)² γ_k²` converges and the `O(1/k)` rate is kept.
    #[serde(rename = "b")]
    Power { a: f64 },
}

impl ToleranceSchedule {
    pub fn sqrt(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("schedule A needs eps > 0, got {eps}")));
        }
        Ok(ToleranceSchedule::Sqrt { eps })
    }

    pub fn power(a: f64) -> Result<Self> {
        if !(a > 1.5 && a.is_finite()) {
            return Err(Error::invalid(format!("schedule B needs a > 3/2, got {a}")));
        }
        Ok(ToleranceSchedule::Power { a })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ToleranceSchedule::Zero => Ok(()),
            ToleranceSchedule::Sqrt { eps } => Self::sqrt(eps).map(|_| ()),
            ToleranceSchedule::Power { a } => Self::power(a).map(|_| ()),
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        let kp1 = (k + 1) as f64;
        match *self {
            ToleranceSchedule::Zero => 0.0,
            ToleranceSchedule::Sqrt { eps } => eps / kp1.sqrt(),
            ToleranceSchedule::Power { a } => kp1.powf(-a),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ToleranceSchedule::Zero => "zero",
            ToleranceSchedule::Sqrt { .. } => "a",
            ToleranceSchedule::Power { .. } => "b",
        }
    }
}
