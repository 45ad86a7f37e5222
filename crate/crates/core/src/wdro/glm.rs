use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Link function `Ψ` of a generalized linear model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Glm {
    /// `Ψ(t) = log(1 + e^t)`.
    Logistic,
    /// `Ψ(t) = t²/2`, treated as Lipschitz on `|t| <= range`.
    Quadratic { range: f64 },
}

impl Glm {
    pub fn validate(&self) -> Result<()> {
        if let Glm::Quadratic { range } = self {
            if !(*range > 0.0 && range.is_finite()) {
                return Err(Error::invalid(format!(
                    "quadratic link needs a positive operating range, got {range}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            // log(1 + e^t) without overflow
            Glm::Logistic => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            Glm::Quadratic { .. } => 0.5 * t * t,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Glm::Logistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Glm::Quadratic { .. } => t,
        }
    }

    /// Lipschitz constant of `Ψ'` (L̄0).
    pub fn smoothness(&self) -> f64 {
        match self {
            Glm::Logistic => 0.25,
            Glm::Quadratic { .. } => 1.0,
        }
    }

    /// Lipschitz constant of `Ψ` (L̃0). For the quadratic link this holds only
    /// on the operating range.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Glm::Logistic => 1.0,
            Glm::Quadratic { range } => *range,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Glm::Logistic => "logistic",
            Glm::Quadratic { .. } => "quadratic",
        }
    }
}

/// Regularizer `Ψ0 : R^{d-1} -> R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    Zero,
    /// `(ρ/2)|w|²`
    Ridge { rho: f64 },
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        if let Regularizer::Ridge { rho } = self {
            if !(*rho >= 0.0 && rho.is_finite()) {
                return Err(Error::invalid(format!("ridge weight must be >= 0, got {rho}")));
            }
        }
        Ok(())
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::Ridge { rho } => 0.5 * rho * crate::point::dot(w, w),
        }
    }

    /// `out += scale * Ψ0'(w)`
    pub fn add_gradient(&self, w: &[f64], scale: f64, out: &mut [f64]) {
        if let Regularizer::Ridge { rho } = self {
            crate::point::axpy(scale * rho, w, out);
        }
    }

    pub fn smoothness(&self) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::Ridge { rho } => *rho,
        }
    }
}
