use crate::error::Result;
use crate::operator::{residual_exact, FiniteSumInclusion, Operator};
use crate::page::{EstimatorMode, PageState};
use crate::point::{dist, Point};

use super::diagnostics::{potential_value, stopping_rule, zdiff_identity_check, StopDecision};
use super::oracle::InexactResidual;
use super::schedule::ToleranceSchedule;
use super::state::{step_stochastic, HalpernState, ParameterRule, StepRecord};

/// Limits and bookkeeping for a driver run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Iteration budget `K`; rows `k = 0..=K` are logged.
    pub budget: usize,
    /// Stop early once the logged residual is at most this value.
    pub target_eps: Option<f64>,
    /// Keep every iterate in the returned trace.
    pub keep_points: bool,
    /// Component evaluations charged per deterministic residual evaluation
    /// (e.g. `N` for an exact finite-sum residual, 0 for a raw operator).
    pub samples_per_eval: u64,
    pub rule: ParameterRule,
}

impl RunOptions {
    pub fn with_budget(budget: usize) -> Self {
        RunOptions {
            budget,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PotentialKind {
    /// Evaluated at `G(z^k)`.
    #[default]
    Exact,
    /// Evaluated at `z̃^k`.
    Approximate,
}

impl PotentialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PotentialKind::Exact => "exact",
            PotentialKind::Approximate => "approximate",
        }
    }
}

/// One logged row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationRecord {
    pub k: usize,
    /// `|G(z^k)|`, or `|z̃^k|` when no exact residual is available.
    pub res_norm: f64,
    /// `|z^{k+1} - z^k|`; `None` on the final row.
    pub step_norm: Option<f64>,
    pub potential: Option<f64>,
    pub gamma_k: f64,
    pub sigma_k: f64,
    pub samples: u64,
    pub cum_samples: u64,
    /// `|G(z^k) - z̃^k|` when both are known.
    pub err_norm: Option<f64>,
    /// Largest relative residual of the z-difference identities for this step.
    pub identity_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub l: f64,
    pub potential_kind: PotentialKind,
    /// Standard parameters were used, so the rate bounds apply.
    pub certified: bool,
    pub records: Vec<IterationRecord>,
    pub z0: Point,
    pub final_point: Point,
    pub stop: StopDecision,
    pub points: Option<Vec<Point>>,
}

impl IterationTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("traces have at least one row")
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.records
            .iter()
            .filter_map(|r| r.identity_residual)
            .fold(0.0, f64::max)
    }
}

/// Receives rows as soon as they are complete.
pub trait TraceSink {
    fn record(&mut self, row: &IterationRecord) -> Result<()>;
}

pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _: &IterationRecord) -> Result<()> {
        Ok(())
    }
}

impl TraceSink for Vec<IterationRecord> {
    fn record(&mut self, row: &IterationRecord) -> Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

struct Recorder<'a> {
    sink: &'a mut dyn TraceSink,
    records: Vec<IterationRecord>,
    points: Option<Vec<Point>>,
    cum: u64,
    l: f64,
    certified: bool,
}

impl<'a> Recorder<'a> {
    fn new(sink: &'a mut dyn TraceSink, opts: &RunOptions, state: &HalpernState) -> Self {
        Recorder {
            sink,
            records: Vec::with_capacity(opts.budget.min(1 << 20) + 1),
            points: opts.keep_points.then(|| vec![state.z().clone()]),
            cum: 0,
            l: state.l(),
            certified: state.certified(),
        }
    }

    /// Fills in the step fields of `row`, then emits it.
    fn push(
        &mut self,
        mut row: IterationRecord,
        z0: &Point,
        step: Option<&StepRecord>,
    ) -> Result<()> {
        self.cum += row.samples;
        row.cum_samples = self.cum;
        if let Some(s) = step {
            row.step_norm = Some(dist(&s.z_after, &s.z_before));
            if self.certified {
                row.identity_residual =
                    Some(zdiff_identity_check(z0, s, self.l).max_residual());
            }
            if let Some(p) = self.points.as_mut() {
                p.push(s.z_after.clone());
            }
        }
        self.sink.record(&row)?;
        self.records.push(row);
        Ok(())
    }

    fn should_stop(&self, opts: &RunOptions) -> StopDecision {
        stopping_rule(&self.records, opts.target_eps, opts.budget)
    }

    fn finish(self, state: &HalpernState, kind: PotentialKind, stop: StopDecision) -> IterationTrace {
        IterationTrace {
            l: self.l,
            potential_kind: kind,
            certified: self.certified,
            records: self.records,
            z0: state.z0().clone(),
            final_point: state.z().clone(),
            stop,
            points: self.points,
        }
    }
}

fn early_stop(row: &IterationRecord, opts: &RunOptions) -> bool {
    row.k >= opts.budget || opts.target_eps.is_some_and(|e| row.res_norm <= e)
}

/// Exact Halpern iteration on a `1/L`-co-coercive operator `g`.
pub fn run_exact(
    g: &dyn Operator,
    z0: Point,
    l: f64,
    opts: &RunOptions,
    sink: &mut dyn TraceSink,
) -> Result<IterationTrace> {
    crate::error::check_dim(g.dim(), z0.dim())?;
    let mut state = HalpernState::new(z0, l)?.with_parameter_rule(opts.rule.clone());
    let mut rec = Recorder::new(sink, opts, &state);
    loop {
        let k = state.k();
        let gz = g.apply(state.z())?;
        let mut row = IterationRecord {
            k,
            res_norm: gz.norm(),
            potential: Some(potential_value(k, l, state.z0(), state.z(), &gz)),
            samples: opts.samples_per_eval,
            err_norm: Some(0.0),
            ..Default::default()
        };
        if early_stop(&row, opts) {
            row.err_norm = None;
            rec.push(row, state.z0(), None)?;
            break;
        }
        let z0 = state.z0().clone();
        let step = state.advance(gz)?;
        rec.push(row, &z0, Some(&step))?;
    }
    let stop = rec.should_stop(opts);
    Ok(rec.finish(&state, PotentialKind::Exact, stop))
}

/// Inexact Halpern iteration. When `exact` is given, the logged residual and
/// potential use `G(z^k)` and the oracle error is recorded; otherwise they
/// use `z̃^k`.
pub fn run_inexact(
    exact: Option<&dyn Operator>,
    oracle: &mut dyn InexactResidual,
    z0: Point,
    l: f64,
    schedule: &ToleranceSchedule,
    opts: &RunOptions,
    sink: &mut dyn TraceSink,
) -> Result<IterationTrace> {
    crate::error::check_dim(oracle.dim(), z0.dim())?;
    schedule.validate()?;
    let mut state = HalpernState::new(z0, l)?.with_parameter_rule(opts.rule.clone());
    let mut rec = Recorder::new(sink, opts, &state);
    let kind = if exact.is_some() {
        PotentialKind::Exact
    } else {
        PotentialKind::Approximate
    };
    loop {
        let k = state.k();
        let gamma = schedule.gamma(k);
        let zt = oracle.residual(state.z(), gamma)?;
        let gz = exact.map(|g| g.apply(state.z())).transpose()?;
        let shown = gz.as_ref().unwrap_or(&zt);
        let row = IterationRecord {
            k,
            res_norm: shown.norm(),
            potential: Some(potential_value(k, l, state.z0(), state.z(), shown)),
            gamma_k: gamma,
            samples: opts.samples_per_eval,
            err_norm: gz.as_ref().map(|g| dist(g, &zt)),
            ..Default::default()
        };
        if early_stop(&row, opts) {
            rec.push(row, state.z0(), None)?;
            break;
        }
        let z0 = state.z0().clone();
        let step = state.advance(zt)?;
        rec.push(row, &z0, Some(&step))?;
    }
    let stop = rec.should_stop(opts);
    Ok(rec.finish(&state, kind, stop))
}

/// Stochastic Halpern iteration with PAGE estimates of `F`. The step constant
/// is `L = 1/c` with `c = α(4 - αL0)/4`. When the resolvent is exact, the
/// logged residual is `|G(z^k)|` (evaluated outside the sample budget);
/// otherwise `|z̃^k|`. The potential always uses `z̃^k`.
pub fn run_stochastic(
    prob: &FiniteSumInclusion,
    z0: Point,
    mode: EstimatorMode,
    seed: u64,
    gamma: &ToleranceSchedule,
    opts: &RunOptions,
    sink: &mut dyn TraceSink,
) -> Result<IterationTrace> {
    gamma.validate()?;
    let mut state = HalpernState::for_problem(prob, z0)?.with_parameter_rule(opts.rule.clone());
    let mut page = PageState::new(mode, seed)?;
    let exact = prob.resolvent().is_exact();
    let l = state.l();
    let mut rec = Recorder::new(sink, opts, &state);
    loop {
        let k = state.k();
        let gz = if exact {
            Some(residual_exact(prob, state.z())?)
        } else {
            None
        };
        // Without an exact resolvent the previous z̃ stands in for G(z^k).
        let shown = gz
            .as_ref()
            .map(|g| g.norm())
            .or_else(|| state.last_ztilde().map(|z| z.norm()));
        if k >= opts.budget
            || opts
                .target_eps
                .is_some_and(|e| shown.is_some_and(|r| r <= e))
        {
            let row = IterationRecord {
                k,
                res_norm: shown.unwrap_or(f64::NAN),
                gamma_k: gamma.gamma(k),
                ..Default::default()
            };
            rec.push(row, state.z0(), None)?;
            break;
        }
        let z0 = state.z0().clone();
        let zk = state.z().clone();
        let (step, draw) = step_stochastic(&mut state, prob, &mut page, gamma)?;
        let zt = &step.ztilde;
        let row = IterationRecord {
            k,
            res_norm: gz.as_ref().map_or_else(|| zt.norm(), |g| g.norm()),
            potential: Some(potential_value(k, l, &z0, &zk, zt)),
            gamma_k: gamma.gamma(k),
            sigma_k: draw.sigma_k(),
            samples: draw.samples,
            err_norm: gz.as_ref().map(|g| dist(g, zt)),
            ..Default::default()
        };
        rec.push(row, &z0, Some(&step))?;
    }
    let stop = rec.should_stop(opts);
    Ok(rec.finish(&state, PotentialKind::Approximate, stop))
}
