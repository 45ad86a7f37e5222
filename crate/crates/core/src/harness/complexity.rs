use crate::error::{Error, Result};
use crate::halpern::ToleranceSchedule;

use super::config::{ExperimentConfig, SolverKind};
use super::fit::least_squares;
use super::runner::run_experiment;
use super::trace::AggregateRow;

pub const MIN_EPS_VALUES: usize = 3;
pub const MIN_SEEDS: usize = 10;
/// Exponent of `1/ε` in the sample complexity under schedule A.
pub const PREDICTED_EXPONENT: f64 = 3.0;
/// Slopes in this range are reported as consistent with the prediction.
pub const EXPONENT_BAND: (f64, f64) = (2.0, 4.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub eps: f64,
    /// First `k` with seed-mean `|G(z^k)|² <= ε²`.
    pub k: Option<usize>,
    /// Seed-mean cumulative samples at that `k`.
    pub samples: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityRow>,
    /// Slope of `log samples` against `log(1/ε)` over uncensored rows.
    pub slope: Option<f64>,
    pub predicted: f64,
    pub within_band: bool,
}

pub fn complexity_row(eps: f64, agg: &[AggregateRow]) -> ComplexityRow {
    match agg.iter().find(|r| r.mean_res_sq <= eps * eps) {
        Some(r) => ComplexityRow {
            eps,
            k: Some(r.k),
            samples: Some(r.mean_cum_samples),
            censored: false,
        },
        None => ComplexityRow {
            eps,
            k: None,
            samples: None,
            censored: true,
        },
    }
}

/// Builds the table from per-`ε` aggregates. Censored rows are kept in the
/// table and left out of the fit.
pub fn complexity_from_aggregates(runs: &[(f64, Vec<AggregateRow>)]) -> ComplexityReport {
    let rows: Vec<ComplexityRow> = runs.iter().map(|(e, a)| complexity_row(*e, a)).collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match r.samples {
            Some(s) if s > 0.0 => Some(((1.0 / r.eps).ln(), s.ln())),
            _ => None,
        })
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        least_squares(&x, &y).0
    });
    ComplexityReport {
        within_band: slope.is_some_and(|s| (EXPONENT_BAND.0..=EXPONENT_BAND.1).contains(&s)),
        rows,
        slope,
        predicted: PREDICTED_EXPONENT,
    }
}

/// Runs `base` under schedule A for each `ε` (PAGE parameters following the
/// schedule) and reports the samples needed to reach mean `|G|² <= ε²`.
/// Each run writes into `<output.dir>/eps_<i>`.
pub fn sample_complexity_report(base: &ExperimentConfig, eps_grid: &[f64]) -> Result<ComplexityReport> {
    if eps_grid.len() < MIN_EPS_VALUES {
        return Err(Error::Config(format!(
            "sample complexity needs at least {MIN_EPS_VALUES} eps values, got {}",
            eps_grid.len()
        )));
    }
    if base.solver.seeds.len() < MIN_SEEDS {
        return Err(Error::Config(format!(
            "sample complexity needs at least {MIN_SEEDS} seeds, got {}",
            base.solver.seeds.len()
        )));
    }
    if base.solver.kind != SolverKind::Stochastic {
        return Err(Error::Config("sample complexity needs the stochastic solver".into()));
    }
    let mut runs = Vec::with_capacity(eps_grid.len());
    for (i, &eps) in eps_grid.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.schedule = ToleranceSchedule::sqrt(eps).map_err(|e| Error::Config(e.to_string()))?;
        cfg.page.eps = None;
        cfg.page.a = None;
        cfg.solver.target_eps = None;
        cfg.output.dir = base.output.dir.join(format!("eps_{i}"));
        let out = run_experiment(&cfg)?;
        runs.push((eps, out.aggregate));
    }
    Ok(complexity_from_aggregates(&runs))
}
