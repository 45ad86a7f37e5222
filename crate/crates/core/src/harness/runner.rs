use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halpern::{
    run_exact, run_inexact, run_stochastic, ExactOracle, ForwardBackwardOracle, InexactResidual,
    InjectedErrorOracle, Injection, IterationTrace, RunOptions, TraceSink,
};
use crate::operator::{AffineOperator, FiniteSumInclusion, Operator, ResidualOperator};
use crate::page::{estimate_sigma, EstimatorMode, PageConfig};
use crate::point::{dist, Point};
use crate::projections::EuclideanBall;
use crate::wdro::{build_wdro_cc_problem, build_wdrsl_problem, CcLossSpec, GlmSpec, QuadraticSaddleLoss,
    wdrsl_smoothness_constant};

use super::config::{EstimatorKind, ExperimentConfig, InjectionKind, ProblemKind, SolverKind};
use super::dataset::{ingest_csv, read_matrix_csv};
use super::synth::{synth_quadratic, synth_wdrsl};
use super::trace::{
    aggregate, read_trace, write_aggregate, AggregateRow, TraceConstants, TraceHeader, TraceWriter,
};

pub enum InstanceKind {
    Operator(Arc<dyn Operator>),
    FiniteSum(FiniteSumInclusion),
}

/// A problem built from a config, ready to be handed to a driver.
pub struct Instance {
    pub kind: InstanceKind,
    pub z0: Point,
    pub constants: TraceConstants,
    /// A known root, when the generator provides one.
    pub z_star: Option<Point>,
}

impl Instance {
    /// `|z0 - z*|` when the root is known.
    pub fn distance(&self) -> Option<f64> {
        self.z_star.as_ref().map(|s| dist(&self.z0, s))
    }

    pub fn dim(&self) -> usize {
        self.z0.dim()
    }
}

fn default_alpha(cfg: &ExperimentConfig, l0: f64) -> f64 {
    cfg.problem.alpha.unwrap_or(1.0 / l0)
}

/// Builds the instance for one run seed. `problem.seed`, when set, fixes the
/// instance across run seeds.
pub fn build_instance(cfg: &ExperimentConfig, run_seed: u64) -> Result<Instance> {
    let p = &cfg.problem;
    let seed = p.seed.unwrap_or(run_seed);
    match p.kind {
        ProblemKind::SyntheticQuadratic => {
            let q = synth_quadratic(p.dim, p.cond, seed)?;
            Ok(Instance {
                z0: Point::zeros(p.dim),
                constants: TraceConstants {
                    l: q.l,
                    ..Default::default()
                },
                z_star: Some(q.z_star),
                kind: InstanceKind::Operator(Arc::new(q.operator)),
            })
        }
        ProblemKind::RawCocoercive => {
            let path = p.matrix.as_ref().expect("validated");
            let rows = read_matrix_csv(path)?;
            let n = rows.len();
            if rows[0].len() != n {
                return Err(Error::Data {
                    line: 0,
                    message: format!("matrix is {n} x {}, expected square", rows[0].len()),
                });
            }
            let a = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
            let shift = match &p.shift {
                Some(s) => {
                    let v: Vec<f64> = read_matrix_csv(s)?.into_iter().flatten().collect();
                    if v.len() != n {
                        return Err(Error::Data {
                            line: 0,
                            message: format!("shift has {} entries, expected {n}", v.len()),
                        });
                    }
                    v
                }
                None => vec![0.0; n],
            };
            let op = AffineOperator::new(a, shift)?;
            Ok(Instance {
                z0: Point::zeros(n),
                constants: TraceConstants {
                    l: p.l.expect("validated"),
                    ..Default::default()
                },
                z_star: None,
                kind: InstanceKind::Operator(Arc::new(op)),
            })
        }
        ProblemKind::Wdrsl => {
            let data = match &p.dataset {
                Some(path) => ingest_csv(path)?,
                None => synth_wdrsl(p.n, p.d, p.separability, seed)?,
            };
            let spec = GlmSpec::new(p.link, p.theta, p.kappa).with_regularizer(p.regularizer);
            spec.validate()?;
            let l0 = wdrsl_smoothness_constant(&data, spec.smoothness_modulus(), spec.kappa);
            let alpha = default_alpha(cfg, l0);
            let prob = build_wdrsl_problem(Arc::new(data), &spec, alpha)?;
            Ok(Instance {
                z0: prob.default_initial_point(),
                constants: TraceConstants {
                    l0: Some(prob.l0),
                    l: prob.inclusion.step_constant(),
                    alpha: Some(alpha),
                    theta: Some(p.theta),
                    kappa: Some(p.kappa),
                },
                z_star: None,
                kind: InstanceKind::FiniteSum(prob.inclusion),
            })
        }
        ProblemKind::WdroCc => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = p.dim;
            let scale = 1.0 / (dim as f64).sqrt();
            let b = DMatrix::from_fn(dim, dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
            let loss = QuadraticSaddleLoss::new(1.0, 1.0, b)?;
            let bn = loss.b.clone().singular_values().max();
            // μI + skew part: co-coercive with modulus μ/(μ² + |B|²).
            let l0 = 1.0 + bn * bn;
            let data: Vec<Vec<f64>> = (0..p.n)
                .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let x_set = Arc::new(EuclideanBall::new(vec![0.0; dim], p.x_radius)?);
            let spec = CcLossSpec::new(Arc::new(loss), l0, p.theta, x_set);
            let alpha = default_alpha(cfg, l0);
            let prob = build_wdro_cc_problem(&data, &spec, alpha)?;
            Ok(Instance {
                z0: prob.initial_point(&vec![0.0; dim])?,
                constants: TraceConstants {
                    l0: Some(l0),
                    l: prob.inclusion.step_constant(),
                    alpha: Some(alpha),
                    theta: Some(p.theta),
                    kappa: None,
                },
                z_star: None,
                kind: InstanceKind::FiniteSum(prob.inclusion),
            })
        }
    }
}

fn injection(kind: InjectionKind, seed: u64) -> Option<Injection> {
    match kind {
        InjectionKind::None => None,
        InjectionKind::Opposing => Some(Injection::Opposing),
        InjectionKind::Aligned => Some(Injection::Aligned),
        InjectionKind::Random => Some(Injection::Random { seed }),
    }
}

/// Estimator for the stochastic driver, per the `[page]` section.
pub fn estimator_mode(cfg: &ExperimentConfig, prob: &FiniteSumInclusion, z0: &[f64], seed: u64) -> Result<EstimatorMode> {
    if cfg.page.estimator == EstimatorKind::FullBatch {
        return Ok(EstimatorMode::FullBatch);
    }
    let (eps, a) = cfg.page_parameters();
    let sigma = match cfg.page.sigma {
        Some(s) => s,
        None => estimate_sigma(prob.components().as_ref(), z0, cfg.page.pilot_samples, seed)?,
    };
    let mut pc = PageConfig::new(eps, a, sigma, prob.l0());
    pc.cap_multiple = (cfg.page.cap_multiple > 0.0).then_some(cfg.page.cap_multiple);
    pc.full_batch_override = cfg.page.full_batch_override;
    Ok(EstimatorMode::Page(pc))
}

/// Runs one seed of `cfg` on a prebuilt instance.
pub fn run_instance(
    cfg: &ExperimentConfig,
    inst: &Instance,
    seed: u64,
    sink: &mut dyn TraceSink,
) -> Result<IterationTrace> {
    let opts = RunOptions {
        budget: cfg.solver.budget,
        target_eps: cfg.solver.target_eps,
        samples_per_eval: match &inst.kind {
            InstanceKind::Operator(_) => 0,
            InstanceKind::FiniteSum(p) => p.n() as u64,
        },
        ..Default::default()
    };
    let z0 = inst.z0.clone();
    let l = inst.constants.l;
    let schedule = &cfg.schedule;
    match (&inst.kind, cfg.solver.kind) {
        (InstanceKind::Operator(g), SolverKind::Exact) => run_exact(g.as_ref(), z0, l, &opts, sink),
        (InstanceKind::FiniteSum(p), SolverKind::Exact) => {
            let g = ResidualOperator::new(p.clone())?;
            run_exact(&g, z0, l, &opts, sink)
        }
        (InstanceKind::Operator(g), SolverKind::Inexact) => {
            let mut oracle: Box<dyn InexactResidual> = match injection(cfg.solver.injection, seed) {
                Some(m) => Box::new(InjectedErrorOracle::new(g.clone(), m)),
                None => Box::new(ExactOracle::new(g.clone())),
            };
            run_inexact(Some(g.as_ref()), oracle.as_mut(), z0, l, schedule, &opts, sink)
        }
        (InstanceKind::FiniteSum(p), SolverKind::Inexact) => {
            let exact = p
                .resolvent()
                .is_exact()
                .then(|| ResidualOperator::new(p.clone()))
                .transpose()?;
            let exact_dyn = exact.as_ref().map(|g| g as &dyn Operator);
            match injection(cfg.solver.injection, seed) {
                Some(m) => {
                    let g = exact.as_ref().ok_or(Error::MissingExactResolvent)?;
                    let mut oracle = InjectedErrorOracle::new(g, m);
                    run_inexact(exact_dyn, &mut oracle, z0, l, schedule, &opts, sink)
                }
                None => {
                    let mut oracle = ForwardBackwardOracle::new(p);
                    run_inexact(exact_dyn, &mut oracle, z0, l, schedule, &opts, sink)
                }
            }
        }
        (InstanceKind::FiniteSum(p), SolverKind::Stochastic) => {
            let mode = estimator_mode(cfg, p, &z0, seed)?;
            run_stochastic(p, z0, mode, seed, schedule, &opts, sink)
        }
        (InstanceKind::Operator(_), SolverKind::Stochastic) => Err(Error::Config(
            "the stochastic solver needs a finite-sum problem".into(),
        )),
    }
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

pub fn aggregate_path(dir: &Path) -> PathBuf {
    dir.join("aggregate.csv")
}

pub struct SeedRun {
    pub seed: u64,
    pub path: PathBuf,
    pub trace: IterationTrace,
    pub distance: Option<f64>,
}

pub struct ExperimentOutcome {
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<AggregateRow>,
    pub aggregate_path: PathBuf,
}

fn run_one(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<SeedRun> {
    let inst = build_instance(cfg, seed)?;
    let mut extra = Vec::new();
    if let Some(d) = inst.distance() {
        extra.push(("distance".to_string(), format!("{d:?}")));
    }
    extra.push(("dim".to_string(), inst.dim().to_string()));
    let kind = match cfg.solver.kind {
        SolverKind::Stochastic => "approximate",
        SolverKind::Inexact if matches!(&inst.kind, InstanceKind::FiniteSum(p) if !p.resolvent().is_exact()) => {
            "approximate"
        }
        _ => "exact",
    };
    let header = TraceHeader {
        seed,
        constants: inst.constants,
        potential_kind: kind.into(),
        extra,
        config: Some(cfg.clone()),
    };
    let path = trace_path(dir, seed);
    let mut writer = TraceWriter::create(&path, &header)?;
    let trace = run_instance(cfg, &inst, seed, &mut writer)?;
    writer.finish()?;
    Ok(SeedRun {
        seed,
        path,
        trace,
        distance: inst.distance(),
    })
}

/// Runs every seed of `cfg` in parallel, writing one trace per seed and
/// `aggregate.csv` into `cfg.output.dir`. The aggregate is computed from
/// the trace files as written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let ctx = |seed: u64| {
        format!(
            "{:?} / {:?}, seed {seed}",
            cfg.problem.kind, cfg.solver.kind
        )
    };
    let mut runs: Vec<SeedRun> = cfg
        .solver
        .seeds
        .par_iter()
        .map(|&seed| run_one(cfg, seed, &dir).map_err(|e| e.context(ctx(seed))))
        .collect::<Result<_>>()?;
    runs.sort_by_key(|r| r.seed);
    let files = runs
        .iter()
        .map(|r| read_trace(&r.path))
        .collect::<Result<Vec<_>>>()?;
    let agg = aggregate(&files);
    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    let aggregate_path = aggregate_path(&dir);
    write_aggregate(&aggregate_path, &agg, &seeds)?;
    Ok(ExperimentOutcome {
        runs,
        aggregate: agg,
        aggregate_path,
    })
}
