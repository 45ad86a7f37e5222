//! Acceptance suite. Prints one line per criterion; exits non-zero when a
//! criterion that is expected to hold fails.
//!
//! Some criteria are known not to hold for this method on the configured
//! instances. They are still run in full and reported as `FAIL (expected)`;
//! should one start passing it is reported as `XPASS`. Soft criteria report
//! `WARN` instead of failing.

mod common;

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use halpern_core::halpern::{
    potential_inequality_check, rate_certificate, run_exact, run_inexact, run_stochastic, FnOracle,
    InexactResidual, InjectedErrorOracle, Injection, IterationTrace, NullSink, RateInput,
    RunOptions, ToleranceSchedule, ZDIFF_TOLERANCE,
};
use halpern_core::harness::{
    build_instance, fit_rate_points, quadratic_components, run_experiment,
    sample_complexity_report, synth_quadratic, synth_wdrsl, ExperimentConfig, FitOutcome,
    InstanceKind,
};
use halpern_core::operator::{
    check_cocoercive, AffineOperator, ComponentOperators, FiniteSumInclusion, FnOperator, Operator,
    ResidualOperator,
};
use halpern_core::page::{EstimatorMode, PageConfig, PageState};
use halpern_core::point::dist;
use halpern_core::projections::{
    BoxSet, ConvexSet, EuclideanBall, IcecreamCone, Intersection, Lifted, LinfBall,
    ProjectionResolvent,
};
use halpern_core::wdro::{wdrsl_fi_value, wdrsl_grad_fi, Glm, GlmSpec, Regularizer};
use halpern_core::{Point, Result};

use common::{ball_barrier, barrier_projection, box_barriers, cone_barriers, config_path, Barrier};

#[derive(Clone, Copy, PartialEq)]
enum Expect {
    Pass,
    /// Known not to hold; the reason is printed with the result.
    Fail(&'static str),
    Soft,
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

// ---------------------------------------------------------------- fixtures

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

fn finite_sum_from_config(name: &str) -> Result<(FiniteSumInclusion, Point)> {
    let cfg = ExperimentConfig::load(&config_path(name))?;
    let inst = build_instance(&cfg, 0)?;
    match inst.kind {
        InstanceKind::FiniteSum(p) => Ok((p, inst.z0)),
        InstanceKind::Operator(_) => panic!("{name} is not a finite-sum problem"),
    }
}

fn wdro_cc_instance() -> Result<(FiniteSumInclusion, Point)> {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        [problem]
        kind = "wdro-cc"
        n = 20
        dim = 3
        theta = 0.5
        seed = 7

        [solver]
        kind = "exact"
        budget = 10
        "#,
    )?;
    let inst = build_instance(&cfg, 0)?;
    match inst.kind {
        InstanceKind::FiniteSum(p) => Ok((p, inst.z0)),
        InstanceKind::Operator(_) => unreachable!(),
    }
}

fn final_res(t: &IterationTrace) -> f64 {
    t.last().res_norm
}

// ---------------------------------------------------------------- criteria

fn exact_rate() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut slopes = Vec::new();
    let mut ok = true;
    for seed in 0..5 {
        let q = synth_quadratic(20, 100.0, seed)?;
        let d = q.z_star.norm();
        let t = run_exact(&q.operator, Point::zeros(20), q.l, &RunOptions::with_budget(10_000), &mut NullSink)?;
        let cert = rate_certificate(&RateInput::from_trace(&t), q.l, d);
        // The residual bound alone, with no error terms.
        let bound = 49.0 * q.l * q.l * d * d;
        let direct = t.records.iter().all(|r| {
            let kk = (r.k as f64 + 1.0) * (r.k as f64 + 2.0);
            r.res_norm * r.res_norm * kk <= bound * (1.0 + 1e-9)
        });
        ok &= cert.pass && direct && t.records.len() == 10_001;
        worst = worst.min(cert.margin);
        let pts: Vec<(usize, f64)> = t.records.iter().map(|r| (r.k, r.res_norm)).collect();
        match fit_rate_points(&pts, 10)? {
            FitOutcome::Fitted(f) => {
                ok &= f.pass;
                slopes.push(f.slope);
            }
            FitOutcome::ConvergedExactly => slopes.push(f64::NEG_INFINITY),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    let max_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        ok,
        format!("5 seeds, K=1e4, min margin {worst:.3e}, max slope {max_slope:.3}, {secs:.2} s"),
    )
}

fn inexact_rate() -> Result<Outcome> {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let mut plateau: f64 = 0.0;
    let eps = 0.01;
    for seed in 0..5 {
        let q = synth_quadratic(20, 100.0, seed)?;
        let d = q.z_star.norm();
        let opts = RunOptions::with_budget(10_000);
        let b = ToleranceSchedule::power(2.0)?;
        let mut oracle = InjectedErrorOracle::new(&q.operator, Injection::Opposing);
        let t = run_inexact(Some(&q.operator), &mut oracle, Point::zeros(20), q.l, &b, &opts, &mut NullSink)?;
        // The injected error must have norm exactly gamma_k.
        let exact_norms = t.records.iter().filter_map(|r| r.err_norm.map(|e| (e, r.gamma_k))).all(|(e, g)| (e - g).abs() <= 1e-12 * g.max(1.0));
        let cert = rate_certificate(&RateInput::from_trace(&t), q.l, d);
        ok &= cert.pass && exact_norms;
        worst = worst.min(cert.margin);

        let a = ToleranceSchedule::sqrt(eps)?;
        let mut oracle = InjectedErrorOracle::new(&q.operator, Injection::Opposing);
        let t = run_inexact(Some(&q.operator), &mut oracle, Point::zeros(20), q.l, &a, &opts, &mut NullSink)?;
        plateau = plateau.max(final_res(&t));
    }
    ok &= plateau <= 10.0 * eps;
    outcome(
        ok,
        format!("schedule B min margin {worst:.3e}; schedule A final |G| max {plateau:.3e} (limit {:.1e})", 10.0 * eps),
    )
}

fn potential_traces() -> Result<Vec<(String, IterationTrace)>> {
    let mut out = Vec::new();
    let b = ToleranceSchedule::power(2.0)?;
    let a = ToleranceSchedule::sqrt(0.01)?;
    let modes = [
        ("opposing/B", Injection::Opposing, b),
        ("aligned/B", Injection::Aligned, b),
        ("random/A", Injection::Random { seed: 3 }, a),
    ];
    let mut run_all = |name: &str, g: &dyn Operator, z0: Point, l: f64, budget: usize| -> Result<()> {
        let opts = RunOptions::with_budget(budget);
        out.push((format!("{name} exact"), run_exact(g, z0.clone(), l, &opts, &mut NullSink)?));
        for (m, inj, s) in modes {
            let mut oracle = InjectedErrorOracle::new(g, inj);
            let t = run_inexact(Some(g), &mut oracle, z0.clone(), l, &s, &opts, &mut NullSink)?;
            out.push((format!("{name} {m}"), t));
        }
        Ok(())
    };

    let q = synth_quadratic(20, 100.0, 0)?;
    run_all("quadratic", &q.operator, Point::zeros(20), q.l, 2000)?;

    let p = boxed_inclusion(0)?;
    let l = p.step_constant();
    run_all("boxed", &ResidualOperator::new(p)?, Point::zeros(4), l, 2000)?;

    let (p, z0) = finite_sum_from_config("wdrsl_stochastic.toml")?;
    let l = p.step_constant();
    run_all("wdrsl", &ResidualOperator::new(p)?, z0, l, 1000)?;

    let (p, z0) = wdro_cc_instance()?;
    let l = p.step_constant();
    run_all("wdro-cc", &ResidualOperator::new(p)?, z0, l, 1000)?;
    Ok(out)
}

fn potential() -> Result<Outcome> {
    let traces = potential_traces()?;
    let mut bad = Vec::new();
    let mut steps = 0;
    for (name, t) in &traces {
        let rep = potential_inequality_check(t)?;
        steps += rep.checked;
        if !rep.passed() || rep.checked + 1 != t.records.len() {
            bad.push(format!("{name}: {} violations", rep.violations));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("0 violations in {steps} steps over {} runs", traces.len())
        } else {
            bad.join("; ")
        },
    )
}

fn identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let mut ok = true;
    let mut note = |t: &IterationTrace, steps: usize| {
        let logged = t.records.iter().filter(|r| r.identity_residual.is_some()).count();
        worst = worst.max(t.max_identity_residual());
        runs += 1;
        logged == steps
    };
    for trial in 0..40u64 {
        let dim = rng.random_range(1..=8);
        // |A| = 1 below, so any L >= 1 keeps the exact run co-coercive.
        let l: f64 = rng.random_range(1.0..5.0);
        let m = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let shift: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut op = AffineOperator::new(&m * m.transpose(), shift.clone())?;
        op = AffineOperator::new(op.matrix() / op.operator_norm(), shift)?;
        let z0 = Point::new((0..dim).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect())?;
        let budget = 60;
        let opts = RunOptions::with_budget(budget);
        let t = run_exact(&op, z0.clone(), l, &opts, &mut NullSink)?;
        ok &= note(&t, budget);

        // Oracle output is arbitrary: the identities are algebraic.
        let mut fuzz = ChaCha8Rng::seed_from_u64(trial);
        let mut oracle = FnOracle::new(dim, move |z: &[f64], gamma: f64| {
            let scale = 10f64.powf(fuzz.random_range(-6.0..1.0));
            let v = z.iter().map(|x| x.sin() * scale + gamma * fuzz.sample::<f64, _>(StandardNormal));
            Point::new(v.collect())
        });
        let s = ToleranceSchedule::sqrt(rng.random_range(0.01..1.0))?;
        let t = run_inexact(None, &mut oracle, z0, l, &s, &opts, &mut NullSink)?;
        ok &= note(&t, budget);
        check_oracle_dim(&oracle, dim);

        let prob = boxed_inclusion(trial)?;
        let mode = EstimatorMode::Page(PageConfig::new(rng.random_range(0.1..2.0), 2.0, 1.0, prob.l0()));
        let z0 = Point::new((0..4).map(|_| rng.sample(StandardNormal)).collect())?;
        let t = run_stochastic(&prob, z0, mode, trial, &ToleranceSchedule::power(2.0)?, &opts, &mut NullSink)?;
        ok &= note(&t, budget);
    }
    ok &= worst <= ZDIFF_TOLERANCE;
    outcome(ok, format!("max relative residual {worst:.2e} over {runs} fuzzed runs"))
}

fn check_oracle_dim(o: &dyn InexactResidual, dim: usize) {
    assert_eq!(o.dim(), dim);
}

fn page_variance() -> Result<Outcome> {
    let start = Instant::now();
    let reps = 5000;
    let (comps, l0) = quadratic_components(50, 4, 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // Short steps keep the correction minibatches small.
    let mut path = vec![(0..4).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>()];
    for _ in 1..4 {
        let prev = path.last().unwrap();
        path.push(prev.iter().map(|v| v + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect());
    }
    let n = comps.count();
    let mut sigma_sq: f64 = 0.0;
    let means: Vec<Vec<f64>> = path
        .iter()
        .map(|z| {
            let mut m = vec![0.0; 4];
            comps.mean_into(z, &mut m);
            m
        })
        .collect();
    for (z, mean) in path.iter().zip(&means) {
        let v: f64 = (0..n)
            .map(|i| dist(&comps.evaluate(i, z).unwrap(), mean).powi(2))
            .sum::<f64>()
            / n as f64;
        sigma_sq = sigma_sq.max(v);
    }
    let slack = 1.0 + 3.0 / (reps as f64).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for a in [0.5, 2.0] {
        let mut cfg = PageConfig::new(1.0, a, sigma_sq.sqrt(), l0);
        cfg.cap_multiple = None;
        cfg.full_batch_override = false;
        let mut mse = [0.0f64; 4];
        for r in 0..reps {
            let mut st = PageState::new(EstimatorMode::Page(cfg), 1000 + r as u64)?;
            for (k, z) in path.iter().enumerate() {
                st.update(&comps, z)?;
                mse[k] += dist(st.estimate().unwrap(), &means[k]).powi(2) / reps as f64;
            }
        }
        let ratios: Vec<String> = mse
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let sk = cfg.schedule(k, Some(1.0)).unwrap().sigma_k;
                ok &= *m <= sk * sk * slack;
                format!("{:.3}", m / (sk * sk))
            })
            .collect();
        parts.push(format!("a={a}: mse/σ_k² = [{}]", ratios.join(", ")));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    outcome(ok, format!("{} (limit {slack:.4}), {secs:.1} s", parts.join("; ")))
}

fn stochastic_convergence() -> Result<Outcome> {
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let mut cfg = ExperimentConfig::load(&config_path("wdrsl_stochastic.toml"))?;
    cfg.output.dir = dir.path().to_path_buf();
    let out = run_experiment(&cfg)?;
    let at = |k: usize| {
        out.aggregate
            .iter()
            .find(|r| r.k == k)
            .map(|r| r.mean_res_sq)
            .unwrap_or(f64::NAN)
    };
    let (g100, g400) = (at(100), at(400));
    let ratio = g400 / g100;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        out.runs.len() == 20 && ratio <= 1.0 / 16.0 && secs < 120.0,
        format!("mean |G|² k=100 {g100:.4e}, k=400 {g400:.4e}, ratio {ratio:.4} (need <= 0.0625), {secs:.1} s"),
    )
}

fn projections() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut cases: Vec<(String, Arc<dyn ConvexSet>, Vec<Barrier>, Vec<f64>)> = Vec::new();
    for (dim, lt) in [(5, 1.0), (2, 0.3)] {
        let s = 1.0 / (lt + 1.0);
        let mut start = vec![0.0; dim];
        start[dim - 1] = 1.0;
        cases.push((format!("icecream d={dim}"), Arc::new(IcecreamCone::new(dim, lt)?), cone_barriers(dim, s), start));
    }
    cases.push(("linf d=5".into(), Arc::new(LinfBall::unit(5)), box_barriers(&[-1.0; 5], &[1.0; 5]), vec![0.0; 5]));
    let center: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
    cases.push((
        "ball d=5".into(),
        Arc::new(EuclideanBall::new(center.clone(), 1.3)?),
        vec![ball_barrier(center.clone(), 1.3, 5)],
        center,
    ));
    let lo = [-1.0, 0.0, -2.0, 0.5];
    let hi = [1.0, 0.25, 2.0, 3.0];
    cases.push((
        "box d=4".into(),
        Arc::new(BoxSet::new(lo.to_vec(), hi.to_vec())?),
        box_barriers(&lo, &hi),
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(),
    ));
    // Dykstra composites.
    let c = vec![0.6, -0.4, 0.5];
    let mut bb = box_barriers(&[-0.5; 3], &[1.0; 3]);
    bb.push(ball_barrier(c.clone(), 0.8, 3));
    cases.push((
        "ball∩box d=3".into(),
        Arc::new(Intersection::new(vec![
            Arc::new(EuclideanBall::new(c.clone(), 0.8)?),
            Arc::new(BoxSet::new(vec![-0.5; 3], vec![1.0; 3])?),
        ])?),
        bb,
        c,
    ));
    let wc = vec![0.3, -0.2, 0.1];
    let lt = 1.0;
    let s = 1.0 / (lt + 1.0);
    let mut cb = cone_barriers(4, s);
    cb.push(ball_barrier(wc.clone(), 0.5, 4));
    let mut start = wc.clone();
    start.push(s * wc.iter().map(|v| v * v).sum::<f64>().sqrt() + 1.0);
    cases.push((
        "cone∩lifted ball d=4".into(),
        Arc::new(Intersection::new(vec![
            Arc::new(IcecreamCone::new(4, lt)?),
            Arc::new(Lifted::new(Arc::new(EuclideanBall::new(wc, 0.5)?), 1)),
        ])?),
        cb,
        start,
    ));

    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, set, cons, start) in &cases {
        let dim = set.dim();
        let mut case_worst: f64 = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..dim).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut p = vec![0.0; dim];
            set.project_inexact(&x, 1e-11, &mut p)?;
            let q = barrier_projection(cons, &x, start);
            case_worst = case_worst.max(dist(&p, &q));
        }
        if case_worst > 1e-6 {
            bad.push(format!("{name}: {case_worst:.2e}"));
        }
        worst = worst.max(case_worst);
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} sets x 100 points, max deviation {worst:.2e}", cases.len())
        } else {
            bad.join("; ")
        },
    )
}

fn gradients() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let specs = [
        GlmSpec::new(Glm::Logistic, 0.1, 1.0),
        GlmSpec::new(Glm::Logistic, 0.5, 0.3).with_regularizer(Regularizer::Ridge { rho: 0.7 }),
        GlmSpec::new(Glm::Quadratic { range: 10.0 }, 0.2, 2.0),
        GlmSpec::new(Glm::Logistic, 1.5, 0.8),
        GlmSpec::new(Glm::Quadratic { range: 5.0 }, 0.05, 0.5).with_regularizer(Regularizer::Ridge { rho: 0.1 }),
    ];
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (j, spec) in specs.iter().enumerate() {
        let n = rng.random_range(3..=15);
        let d = rng.random_range(2..=6);
        let data = synth_wdrsl(n, d, 0.8, 100 + j as u64)?;
        let dim = d + n;
        for _ in 0..100 {
            let z: Vec<f64> = (0..dim)
                .map(|c| if c >= d { rng.random_range(-1.0..1.0) } else { rng.sample(StandardNormal) })
                .collect();
            let i = rng.random_range(0..n);
            let (gx, gy) = wdrsl_grad_fi(&z, i, &data, spec)?;
            let g: Vec<f64> = gx.iter().chain(gy.iter()).copied().collect();
            let mut fd = vec![0.0; dim];
            let mut zp = z.clone();
            for c in 0..dim {
                zp[c] = z[c] + h;
                let up = wdrsl_fi_value(&zp, i, &data, spec)?;
                zp[c] = z[c] - h;
                let down = wdrsl_fi_value(&zp, i, &data, spec)?;
                zp[c] = z[c];
                fd[c] = (up - down) / (2.0 * h);
            }
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(dist(&fd, &g) / gn.max(f64::MIN_POSITIVE));
        }
    }
    outcome(worst <= 1e-5, format!("5 instances x 100 points, max relative error {worst:.2e}"))
}

fn cocoercive_quadratics() -> Result<(bool, String)> {
    let mut ok = true;
    let mut count = 0;
    for seed in 0..3 {
        let q = synth_quadratic(20, 100.0, seed)?;
        let r = check_cocoercive(&q.operator, 1.0 / q.l, 10_000, seed)?;
        ok &= r.passed();
        count += 1;
    }
    let (comps, _) = quadratic_components(4, 5, 9)?;
    for i in 0..comps.count() {
        let dim = comps.dim();
        let comps = &comps;
        // Each component is A_i z - A_i b_i; its co-coercivity constant is 1/|A_i|.
        let a = nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
            let mut e = vec![0.0; dim];
            e[c] = 1.0;
            comps.evaluate(i, &e).unwrap()[r] - comps.evaluate(i, &vec![0.0; dim]).unwrap()[r]
        });
        let op = AffineOperator::linear(a)?;
        let r = check_cocoercive(&op, 1.0 / op.operator_norm(), 10_000, i as u64)?;
        ok &= r.passed();
        count += 1;
    }
    Ok((ok, format!("(a) {count} quadratics {}", if ok { "ok" } else { "VIOLATED" })))
}

fn cocoercive_wdrsl() -> Result<(bool, String)> {
    let (p, _) = finite_sum_from_config("wdrsl_stochastic.toml")?;
    let c = 1.0 / p.l0();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in [0usize, 1, 57, 123, 199] {
        let comps = p.components().clone();
        let op = FnOperator::new(comps.dim(), move |z: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            comps.accumulate(i, z, 1.0, out);
        });
        let r = check_cocoercive(&op, c, 10_000, i as u64)?;
        violations += r.violations;
        worst = worst.min(r.worst_margin);
    }
    Ok((
        violations == 0,
        format!("(b) WDRSL F_i: {violations} violations in 5 x 1e4 pairs, worst margin {worst:.2e}"),
    ))
}

fn cocoercive_residuals() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, (p, _)) in [
        ("boxed", (boxed_inclusion(5)?, Point::zeros(4))),
        ("wdro-cc", wdro_cc_instance()?),
    ] {
        let alpha = p.alpha();
        let c = alpha * (4.0 - alpha * p.l0()) / 4.0;
        ok &= (c - p.residual_modulus()).abs() <= 1e-15 * c;
        let g = ResidualOperator::new(p)?;
        let r = check_cocoercive(&g, c, 10_000, 3)?;
        ok &= r.passed();
        parts.push(format!("{name} {}", r.violations));
    }
    Ok((ok, format!("(c) residual violations: {}", parts.join(", "))))
}

fn cocoercive_attainable() -> Result<Outcome> {
    let (a, da) = cocoercive_quadratics()?;
    let (c, dc) = cocoercive_residuals()?;
    outcome(a && c, format!("{da}; {dc}"))
}

fn cocoercive_saddle() -> Result<Outcome> {
    let (b, db) = cocoercive_wdrsl()?;
    outcome(b, db)
}

fn sample_complexity() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut cfg = ExperimentConfig::load(&config_path("wdrsl_complexity.toml"))?;
    cfg.output.dir = dir.path().to_path_buf();
    let rep = sample_complexity_report(&cfg, &[0.1, 0.05, 0.025])?;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| match (r.k, r.samples) {
            (Some(k), Some(s)) => format!("eps={} k={k} samples={s:.0}", r.eps),
            _ => format!("eps={} censored", r.eps),
        })
        .collect();
    let slope = rep.slope.map_or("n/a".to_string(), |s| format!("{s:.2}"));
    outcome(
        rep.within_band,
        format!("{}; slope {slope} (predicted {}, band [2, 4])", rows.join(", "), rep.predicted),
    )
}

// ---------------------------------------------------------------- driver

type Check = fn() -> Result<Outcome>;

fn main() {
    let criteria: Vec<(&str, &str, Check, Expect)> = vec![
        ("1", "exact-rate certificate", exact_rate, Expect::Pass),
        ("2", "inexact-rate certificate", inexact_rate, Expect::Pass),
        ("3", "potential inequality", potential, Expect::Pass),
        ("4", "update identities", identities, Expect::Pass),
        ("5", "PAGE variance bound", page_variance, Expect::Pass),
        (
            "6",
            "stochastic convergence",
            stochastic_convergence,
            Expect::Fail(
                "Halpern residuals decay like 1/k, so |G|² falls by at most about \
                 (101·102)/(401·402) = 0.064 > 1/16 between k=100 and k=400",
            ),
        ),
        ("7", "projection oracles", projections, Expect::Pass),
        ("8", "gradient checks", gradients, Expect::Pass),
        ("9a/c", "co-coercivity (quadratics, residuals)", cocoercive_attainable, Expect::Pass),
        (
            "9b",
            "co-coercivity (WDRSL saddle components)",
            cocoercive_saddle,
            Expect::Fail("the bilinear coupling in F_i is skew, so F_i is monotone but not co-coercive"),
        ),
        ("10", "sample-complexity trend", sample_complexity, Expect::Soft),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut hard_failures = 0;
    println!("running {} acceptance criteria", criteria.len());
    for (id, name, check, expect) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let res = check();
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match (&res, expect) {
            (Ok(o), Expect::Pass) if o.passed => ("PASS", o.detail.clone()),
            (Ok(o), Expect::Pass) => {
                hard_failures += 1;
                ("FAIL", o.detail.clone())
            }
            (Ok(o), Expect::Fail(_)) if o.passed => ("XPASS", o.detail.clone()),
            (Ok(o), Expect::Fail(why)) => ("FAIL (expected)", format!("{}; {why}", o.detail)),
            (Ok(o), Expect::Soft) if o.passed => ("PASS", o.detail.clone()),
            (Ok(o), Expect::Soft) => ("WARN", o.detail.clone()),
            (Err(e), _) => {
                hard_failures += 1;
                ("ERROR", e.to_string())
            }
        };
        println!("criterion {id:<5} {name:<42} {status:<16} [{secs:>6.1} s] {detail}");
    }
    if hard_failures > 0 {
        println!("{hard_failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: ok");
}
