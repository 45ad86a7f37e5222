//! Invariant suite behind `halpern check`.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::halpern::{
    potential_inequality_check, rate_certificate, run_exact, run_inexact, run_stochastic,
    InjectedErrorOracle, Injection, IterationTrace, NullSink, RateInput, RunOptions,
    ToleranceSchedule, ZDIFF_TOLERANCE,
};
use crate::operator::{
    check_cocoercive, AffineOperator, ComponentOperators, FiniteSumInclusion, Operator,
    OperatorList, ResidualOperator,
};
use crate::page::{EstimatorMode, PageConfig, PageState};
use crate::point::{dist, Point};
use crate::projections::{
    BoxSet, ConvexSet, EuclideanBall, IcecreamCone, LinfBall, ProjectionResolvent,
};

use super::synth::synth_quadratic;
use super::trace::{read_trace, write_trace, TraceConstants, TraceFile, TraceHeader, TraceRow};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub budget: usize,
    pub pairs: usize,
    pub replications: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            budget: 2000,
            pairs: 10_000,
            replications: 2000,
            seed: 0,
        }
    }
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Gradients of random convex quadratics `A_i (z - b_i)`, with `L0 = max |A_i|`.
pub fn quadratic_components(n: usize, dim: usize, seed: u64) -> Result<(OperatorList, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops: Vec<Arc<dyn Operator>> = Vec::with_capacity(n);
    let mut l0: f64 = 0.0;
    for _ in 0..n {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = &g * g.transpose() / dim as f64;
        let b: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let shift: Vec<f64> = (&a * nalgebra::DVector::from_column_slice(&b)).iter().copied().collect();
        let op = AffineOperator::new(a, shift)?;
        l0 = l0.max(op.operator_norm());
        ops.push(Arc::new(op));
    }
    Ok((OperatorList::new(ops)?, l0))
}

fn boxed_inclusion(seed: u64) -> Result<FiniteSumInclusion> {
    let (comps, l0) = quadratic_components(8, 4, seed)?;
    let set = BoxSet::new(vec![-0.5; 4], vec![0.5; 4])?;
    FiniteSumInclusion::new(
        Arc::new(ProjectionResolvent::new(Arc::new(set))),
        Arc::new(comps),
        l0,
        1.0 / l0,
    )
}

fn identity_detail(traces: &[&IterationTrace]) -> (bool, String) {
    let worst = traces
        .iter()
        .map(|t| t.max_identity_residual())
        .fold(0.0, f64::max);
    (
        worst <= ZDIFF_TOLERANCE,
        format!("max relative residual {worst:e} over {} traces", traces.len()),
    )
}

fn projection_checks(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<(&str, Arc<dyn ConvexSet>)> = vec![
        ("icecream", Arc::new(IcecreamCone::new(4, 1.5)?)),
        ("linf", Arc::new(LinfBall::unit(4))),
        ("ball", Arc::new(EuclideanBall::new(vec![0.5, -1.0, 0.0, 2.0], 1.3)?)),
        ("box", Arc::new(BoxSet::new(vec![-1.0, 0.0, -2.0, 1.0], vec![1.0, 0.5, 2.0, 3.0])?)),
    ];
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (name, set) in &sets {
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let p = set.project(&x)?;
            let pp = set.project(&p)?;
            let idem = dist(&p, &pp);
            worst = worst.max(idem);
            if idem > 1e-10 || !set.membership(&p, 1e-9).is_inside() {
                failures.push(*name);
                break;
            }
            // variational inequality against random members
            let y = set.project(&(0..4).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>())?;
            let vi: f64 = (0..4).map(|i| (x[i] - p[i]) * (y[i] - p[i])).sum();
            if vi > 1e-9 {
                failures.push(*name);
                break;
            }
        }
    }
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!("idempotent and variational inequality holds (max drift {worst:e})")
        } else {
            format!("failed for {}", failures.join(", "))
        },
    ))
}

fn page_variance_check(reps: usize, seed: u64) -> Result<(bool, String)> {
    let (comps, l0) = quadratic_components(50, 4, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let path: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let n = comps.count();
    let mut sigma_sq: f64 = 0.0;
    for z in &path {
        let mut mean = vec![0.0; 4];
        comps.mean_into(z, &mut mean);
        let v: f64 = (0..n)
            .map(|i| dist(&comps.evaluate(i, z).unwrap(), &mean).powi(2))
            .sum::<f64>()
            / n as f64;
        sigma_sq = sigma_sq.max(v);
    }
    let mut cfg = PageConfig::new(1.0, 0.5, sigma_sq.sqrt(), l0);
    cfg.cap_multiple = None;
    cfg.full_batch_override = false;
    let mut mse = [0.0f64; 4];
    for r in 0..reps {
        let mut st = PageState::new(EstimatorMode::Page(cfg), seed.wrapping_add(r as u64))?;
        for (k, z) in path.iter().enumerate() {
            st.update(&comps, z)?;
            let mut mean = vec![0.0; 4];
            comps.mean_into(z, &mut mean);
            mse[k] += dist(st.estimate().expect("estimate after update"), &mean).powi(2) / reps as f64;
        }
    }
    let slack = 1.0 + 3.0 / (reps as f64).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, m) in mse.iter().enumerate() {
        let sk = cfg.schedule(k, Some(1.0))?.sigma_k;
        ok &= *m <= sk * sk * slack;
        parts.push(format!("k={k}: {m:.3e} vs {:.3e}", sk * sk));
    }
    Ok((ok, parts.join("; ")))
}

/// Runs the suite; `dir` receives a scratch trace for the round-trip check.
pub fn run_checks(opts: &CheckOptions, dir: &Path) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let q = synth_quadratic(20, 100.0, opts.seed)?;
    let d = q.z_star.norm();

    let rep = check_cocoercive(&q.operator, 1.0 / q.l, opts.pairs, opts.seed)?;
    out.push(result(
        "cocoercive-quadratic",
        rep.passed(),
        format!("{} violations in {} pairs", rep.violations, rep.pairs),
    ));

    let prob = boxed_inclusion(opts.seed)?;
    let g = ResidualOperator::new(prob.clone())?;
    let rep = check_cocoercive(&g, prob.residual_modulus(), opts.pairs, opts.seed)?;
    out.push(result(
        "cocoercive-fb-residual",
        rep.passed(),
        format!("{} violations in {} pairs", rep.violations, rep.pairs),
    ));

    let run_opts = RunOptions::with_budget(opts.budget);
    let exact = run_exact(&q.operator, Point::zeros(20), q.l, &run_opts, &mut NullSink)?;
    let cert = rate_certificate(&RateInput::from_trace(&exact), q.l, d);
    out.push(result(
        "exact-rate",
        cert.pass,
        format!("{} checks, worst margin {:.3e} at k={}", cert.checked, cert.margin, cert.worst_k),
    ));

    let schedule = ToleranceSchedule::power(2.0)?;
    let mut oracle = InjectedErrorOracle::new(&q.operator, Injection::Opposing);
    let inexact = run_inexact(
        Some(&q.operator),
        &mut oracle,
        Point::zeros(20),
        q.l,
        &schedule,
        &run_opts,
        &mut NullSink,
    )?;
    let cert = rate_certificate(&RateInput::from_trace(&inexact), q.l, d);
    out.push(result(
        "inexact-rate",
        cert.pass,
        format!("{} checks, worst margin {:.3e} at k={}", cert.checked, cert.margin, cert.worst_k),
    ));

    let mut viol = 0;
    let mut checked = 0;
    for t in [&exact, &inexact] {
        let p = potential_inequality_check(t)?;
        viol += p.violations;
        checked += p.checked;
    }
    out.push(result(
        "potential",
        viol == 0,
        format!("{viol} violations in {checked} steps"),
    ));

    let stoch = run_stochastic(
        &prob,
        Point::zeros(4),
        EstimatorMode::Page(PageConfig::new(1.0, 2.0, 1.0, prob.l0())),
        opts.seed,
        &schedule,
        &RunOptions::with_budget(opts.budget.min(200)),
        &mut NullSink,
    )?;
    let (ok, detail) = identity_detail(&[&exact, &inexact, &stoch]);
    out.push(result("identities", ok, detail));

    let (ok, detail) = projection_checks(opts.seed)?;
    out.push(result("projections", ok, detail));

    let (ok, detail) = page_variance_check(opts.replications, opts.seed)?;
    out.push(result("page-variance", ok, detail));

    std::fs::create_dir_all(dir)?;
    let tf = TraceFile {
        header: TraceHeader {
            seed: opts.seed,
            constants: TraceConstants {
                l: q.l,
                ..Default::default()
            },
            potential_kind: "exact".into(),
            extra: Vec::new(),
            config: None,
        },
        rows: exact.records.iter().map(TraceRow::from).collect(),
    };
    let path = dir.join("check_roundtrip.csv");
    write_trace(&path, &tf)?;
    let back = read_trace(&path)?;
    out.push(result(
        "trace-round-trip",
        back == tf,
        format!("{} rows via {}", tf.rows.len(), path.display()),
    ));
    Ok(out)
}
