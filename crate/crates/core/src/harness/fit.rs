use crate::error::{Error, Result};

use super::trace::TraceFile;

/// Slope at or below which a fit is taken to show the `O(1/k)` rate.
pub const RATE_PASS_SLOPE: f64 = -0.9;
pub const MIN_FIT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub rows: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Fitted(RateFit),
    /// Every residual at `k >= k_min` is exactly zero.
    ConvergedExactly,
}

impl FitOutcome {
    pub fn pass(&self) -> bool {
        match self {
            FitOutcome::Fitted(f) => f.pass,
            FitOutcome::ConvergedExactly => true,
        }
    }
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Fits `log res_norm = intercept + slope · log k` over rows with
/// `k >= max(k_min, 1)` and a positive residual.
pub fn fit_rate_points(points: &[(usize, f64)], k_min: usize) -> Result<FitOutcome> {
    let window: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|&(k, r)| k >= k_min.max(1) && r.is_finite())
        .collect();
    if !window.is_empty() && window.iter().all(|&(_, r)| r == 0.0) {
        return Ok(FitOutcome::ConvergedExactly);
    }
    let usable: Vec<(f64, f64)> = window
        .iter()
        .filter(|&&(_, r)| r > 0.0)
        .map(|&(k, r)| ((k as f64).ln(), r.ln()))
        .collect();
    if usable.len() < MIN_FIT_ROWS {
        return Err(Error::invalid(format!(
            "rate fit needs at least {MIN_FIT_ROWS} rows with k >= {k_min} and a positive residual, found {}",
            usable.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let (slope, intercept, r2) = least_squares(&x, &y);
    Ok(FitOutcome::Fitted(RateFit {
        slope,
        intercept,
        r2,
        rows: x.len(),
        pass: slope <= RATE_PASS_SLOPE,
    }))
}

pub fn fit_rate(trace: &TraceFile, k_min: usize) -> Result<FitOutcome> {
    let pts: Vec<(usize, f64)> = trace.rows.iter().map(|r| (r.k, r.res_norm)).collect();
    fit_rate_points(&pts, k_min)
}
