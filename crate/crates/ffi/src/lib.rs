//! C ABI over `halpern-core`.
//!
//! Every fallible function returns a [`HalpernStatus`]; on failure the
//! message is available from [`halpern_last_error`] on the same thread.
//! Problems and traces are opaque heap handles released with their `_free`
//! functions. Output arrays are caller-allocated and must hold `dim` values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use halpern_core::halpern::{
    run_exact, run_inexact, run_stochastic, ExactOracle, ForwardBackwardOracle,
    InjectedErrorOracle, Injection, IterationTrace, NullSink, RunOptions, ToleranceSchedule,
};
use halpern_core::harness::synth_quadratic;
use halpern_core::operator::{
    cocoercivity_modulus, FiniteSumInclusion, Operator, ResidualOperator,
};
use halpern_core::page::{estimate_sigma, page_schedule, EstimatorMode, PageConfig};
use halpern_core::projections::{
    project_box, project_euclidean_ball, project_icecream, project_linf_ball,
};
use halpern_core::wdro::{build_wdrsl_problem, Glm, GlmSpec, Regularizer, SupervisedDataset};
use halpern_core::{Error, Point};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalpernStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DataError = 4,
    SolverError = 5,
    Unsupported = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalpernSchedule {
    Zero = 0,
    /// `param` is `eps`.
    Sqrt = 1,
    /// `param` is `a`.
    Power = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalpernInjection {
    None = 0,
    Opposing = 1,
    Aligned = 2,
    Random = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalpernLink {
    Logistic = 0,
    Quadratic = 1,
}

/// One trace row. Missing values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalpernTraceRow {
    pub k: u64,
    pub res_norm: f64,
    pub step_norm: f64,
    pub potential: f64,
    pub gamma_k: f64,
    pub sigma_k: f64,
    pub samples: u64,
    pub cum_samples: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalpernPageSchedule {
    pub p: f64,
    pub n1: u64,
    /// 0 when no correction batch is defined (`k = 0`).
    pub n2: u64,
    pub sigma_k: f64,
}

enum ProblemKind {
    Operator(Arc<dyn Operator>),
    FiniteSum(FiniteSumInclusion),
}

/// Opaque problem handle.
pub struct HalpernProblem {
    kind: ProblemKind,
    z0: Point,
    l: f64,
    z_star: Option<Point>,
}

/// Opaque trace handle.
pub struct HalpernTrace {
    trace: IterationTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HalpernStatus {
    match e {
        Error::Context { source, .. } => status_of(source),
        Error::DimensionMismatch { .. } => HalpernStatus::DimensionMismatch,
        Error::InvalidParameter(_) | Error::Config(_) | Error::IndexOutOfRange { .. } => {
            HalpernStatus::InvalidArgument
        }
        Error::Unsupported(_) | Error::MissingExactResolvent => HalpernStatus::Unsupported,
        Error::Data { .. } | Error::Io(_) | Error::Csv(_) => HalpernStatus::DataError,
        Error::InexactOracle { .. }
        | Error::NonFinite { .. }
        | Error::Diverged { .. }
        | Error::DykstraNotConverged { .. } => HalpernStatus::SolverError,
    }
}

struct Fail(HalpernStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HalpernStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> HalpernStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            HalpernStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            HalpernStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn problem_ref<'a>(p: *const HalpernProblem) -> Result<&'a HalpernProblem, Fail> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn trace_ref<'a>(t: *const HalpernTrace) -> Result<&'a HalpernTrace, Fail> {
    t.as_ref().ok_or_else(|| null("trace"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn schedule(kind: HalpernSchedule, param: f64) -> Result<ToleranceSchedule, Fail> {
    Ok(match kind {
        HalpernSchedule::Zero => ToleranceSchedule::Zero,
        HalpernSchedule::Sqrt => ToleranceSchedule::sqrt(param)?,
        HalpernSchedule::Power => ToleranceSchedule::power(param)?,
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn halpern_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn halpern_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(
        concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes(),
    ) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Synthetic quadratic `G(z) = A(z - z*)` with `|A| = 1`. `z0 = 0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_problem_quadratic_new(
    dim: usize,
    cond: f64,
    seed: u64,
    out: *mut *mut HalpernProblem,
) -> HalpernStatus {
    guard(|| {
        let q = synth_quadratic(dim, cond, seed)?;
        emit(
            out,
            HalpernProblem {
                z0: Point::zeros(dim),
                l: q.l,
                z_star: Some(q.z_star),
                kind: ProblemKind::Operator(Arc::new(q.operator)),
            },
        )
    })
}

/// Robust GLM classification problem. `features` is row-major `n x m`,
/// `labels` holds `n` values in `{-1, +1}`. `link_range` is used by the
/// quadratic link only; `ridge <= 0` means no regularizer; `alpha <= 0`
/// selects `1/L0`. The initial point is `w0 = 0`, `y0 = 0`.
///
/// # Safety
/// `features` must point to `n*m` doubles, `labels` to `n` doubles, and
/// `out` to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn halpern_problem_wdrsl_new(
    features: *const f64,
    labels: *const f64,
    n: usize,
    m: usize,
    link: HalpernLink,
    link_range: f64,
    ridge: f64,
    theta: f64,
    kappa: f64,
    alpha: f64,
    out: *mut *mut HalpernProblem,
) -> HalpernStatus {
    guard(|| {
        let len = n.checked_mul(m).ok_or_else(|| {
            Fail(HalpernStatus::InvalidArgument, "n*m overflows".into())
        })?;
        let f = slice(features, len, "features")?;
        let y = slice(labels, n, "labels")?;
        let rows = if m == 0 {
            vec![Vec::new(); n]
        } else {
            f.chunks(m).map(<[f64]>::to_vec).collect()
        };
        let data = SupervisedDataset::new(rows, y.to_vec())?;
        let psi = match link {
            HalpernLink::Logistic => Glm::Logistic,
            HalpernLink::Quadratic => Glm::Quadratic { range: link_range },
        };
        let reg = if ridge > 0.0 {
            Regularizer::Ridge { rho: ridge }
        } else {
            Regularizer::Zero
        };
        let spec = GlmSpec::new(psi, theta, kappa).with_regularizer(reg);
        spec.validate()?;
        let l0 = halpern_core::wdro::wdrsl_smoothness_constant(
            &data,
            spec.smoothness_modulus(),
            kappa,
        );
        let alpha = if alpha > 0.0 { alpha } else { 1.0 / l0 };
        let prob = build_wdrsl_problem(Arc::new(data), &spec, alpha)?;
        emit(
            out,
            HalpernProblem {
                z0: prob.default_initial_point(),
                l: prob.inclusion.step_constant(),
                z_star: None,
                kind: ProblemKind::FiniteSum(prob.inclusion),
            },
        )
    })
}

/// # Safety
/// `problem` must be null or a handle from a `halpern_problem_*_new` call
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn halpern_problem_free(problem: *mut HalpernProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dimension of the iterate, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_problem_dim(problem: *const HalpernProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.z0.dim())
}

/// Step constant `L` used by the drivers, or NaN for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_problem_step_constant(problem: *const HalpernProblem) -> f64 {
    problem.as_ref().map_or(f64::NAN, |p| p.l)
}

/// Copies the known root into `out` (length `dim`); `Unsupported` when the
/// problem has none.
///
/// # Safety
/// `problem` must be a live handle and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn halpern_problem_root(
    problem: *const HalpernProblem,
    out: *mut f64,
    dim: usize,
) -> HalpernStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let z = p.z_star.as_ref().ok_or_else(|| {
            Fail(HalpernStatus::Unsupported, "problem has no known root".into())
        })?;
        check(z.dim(), dim)?;
        slice_mut(out, dim, "out")?.copy_from_slice(z);
        Ok(())
    })
}

fn check(expected: usize, got: usize) -> Result<(), Fail> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got }.into())
    }
}

/// Exact residual `G(z)`.
///
/// # Safety
/// `problem` must be a live handle; `z` and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn halpern_problem_residual(
    problem: *const HalpernProblem,
    z: *const f64,
    out: *mut f64,
    dim: usize,
) -> HalpernStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        check(p.z0.dim(), dim)?;
        let z = slice(z, dim, "z")?;
        let out = slice_mut(out, dim, "out")?;
        let g = match &p.kind {
            ProblemKind::Operator(g) => g.apply(z)?,
            ProblemKind::FiniteSum(f) => halpern_core::operator::residual_exact(f, z)?,
        };
        out.copy_from_slice(&g);
        Ok(())
    })
}

/// Exact Halpern iteration for `budget` steps from the problem's `z0`.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_run_exact(
    problem: *const HalpernProblem,
    budget: usize,
    out: *mut *mut HalpernTrace,
) -> HalpernStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let opts = RunOptions::with_budget(budget);
        let trace = match &p.kind {
            ProblemKind::Operator(g) => run_exact(g.as_ref(), p.z0.clone(), p.l, &opts, &mut NullSink)?,
            ProblemKind::FiniteSum(f) => {
                let g = ResidualOperator::new(f.clone())?;
                run_exact(&g, p.z0.clone(), p.l, &opts, &mut NullSink)?
            }
        };
        emit(out, HalpernTrace { trace })
    })
}

/// Inexact Halpern iteration. With an injection, the residual is the exact
/// one plus an error of norm exactly `γ_k`; without one, finite-sum problems
/// use their own inexact resolvent.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_run_inexact(
    problem: *const HalpernProblem,
    budget: usize,
    kind: HalpernSchedule,
    param: f64,
    injection: HalpernInjection,
    seed: u64,
    out: *mut *mut HalpernTrace,
) -> HalpernStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let sched = schedule(kind, param)?;
        let opts = RunOptions::with_budget(budget);
        let mode = match injection {
            HalpernInjection::None => None,
            HalpernInjection::Opposing => Some(Injection::Opposing),
            HalpernInjection::Aligned => Some(Injection::Aligned),
            HalpernInjection::Random => Some(Injection::Random { seed }),
        };
        let z0 = p.z0.clone();
        let trace = match (&p.kind, mode) {
            (ProblemKind::Operator(g), Some(m)) => {
                let mut o = InjectedErrorOracle::new(g.clone(), m);
                run_inexact(Some(g.as_ref()), &mut o, z0, p.l, &sched, &opts, &mut NullSink)?
            }
            (ProblemKind::Operator(g), None) => {
                let mut o = ExactOracle::new(g.clone());
                run_inexact(Some(g.as_ref()), &mut o, z0, p.l, &sched, &opts, &mut NullSink)?
            }
            (ProblemKind::FiniteSum(f), Some(m)) => {
                let g = ResidualOperator::new(f.clone())?;
                let mut o = InjectedErrorOracle::new(&g, m);
                run_inexact(Some(&g), &mut o, z0, p.l, &sched, &opts, &mut NullSink)?
            }
            (ProblemKind::FiniteSum(f), None) => {
                let g = f
                    .resolvent()
                    .is_exact()
                    .then(|| ResidualOperator::new(f.clone()))
                    .transpose()?;
                let mut o = ForwardBackwardOracle::new(f);
                run_inexact(
                    g.as_ref().map(|g| g as &dyn Operator),
                    &mut o,
                    z0,
                    p.l,
                    &sched,
                    &opts,
                    &mut NullSink,
                )?
            }
        };
        emit(out, HalpernTrace { trace })
    })
}

/// Stochastic Halpern iteration with the PAGE estimator. `(eps, a)` follow
/// the schedule (`(eps, 1/2)` for `Sqrt`, `(1, a)` for `Power`); `sigma < 0`
/// estimates the variance bound from a pilot pass. `full_batch` replaces
/// PAGE by exact evaluations.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn halpern_run_stochastic(
    problem: *const HalpernProblem,
    budget: usize,
    kind: HalpernSchedule,
    param: f64,
    sigma: f64,
    full_batch: bool,
    seed: u64,
    out: *mut *mut HalpernTrace,
) -> HalpernStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let ProblemKind::FiniteSum(f) = &p.kind else {
            return Err(Fail(
                HalpernStatus::Unsupported,
                "the stochastic driver needs a finite-sum problem".into(),
            ));
        };
        let sched = schedule(kind, param)?;
        let mode = if full_batch {
            EstimatorMode::FullBatch
        } else {
            let (eps, a) = match sched {
                ToleranceSchedule::Sqrt { eps } => (eps, 0.5),
                ToleranceSchedule::Power { a } => (1.0, a),
                ToleranceSchedule::Zero => (1.0, 2.0),
            };
            let sigma = if sigma >= 0.0 {
                sigma
            } else {
                estimate_sigma(f.components().as_ref(), &p.z0, 64, seed)?
            };
            EstimatorMode::Page(PageConfig::new(eps, a, sigma, f.l0()))
        };
        let trace = run_stochastic(
            f,
            p.z0.clone(),
            mode,
            seed,
            &sched,
            &RunOptions::with_budget(budget),
            &mut NullSink,
        )?;
        emit(out, HalpernTrace { trace })
    })
}

/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_free(trace: *mut HalpernTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_len(trace: *const HalpernTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.records.len())
}

/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_row(
    trace: *const HalpernTrace,
    index: usize,
    out: *mut HalpernTraceRow,
) -> HalpernStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let r = t.trace.records.get(index).ok_or_else(|| {
            Fail(
                HalpernStatus::InvalidArgument,
                format!("row {index} out of range ({} rows)", t.trace.records.len()),
            )
        })?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = HalpernTraceRow {
            k: r.k as u64,
            res_norm: r.res_norm,
            step_norm: r.step_norm.unwrap_or(f64::NAN),
            potential: r.potential.unwrap_or(f64::NAN),
            gamma_k: r.gamma_k,
            sigma_k: r.sigma_k,
            samples: r.samples,
            cum_samples: r.cum_samples,
        };
        Ok(())
    })
}

/// Copies the last iterate into `out`.
///
/// # Safety
/// `trace` must be a live handle and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_final_point(
    trace: *const HalpernTrace,
    out: *mut f64,
    dim: usize,
) -> HalpernStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        check(t.trace.final_point.dim(), dim)?;
        slice_mut(out, dim, "out")?.copy_from_slice(&t.trace.final_point);
        Ok(())
    })
}

/// Projection onto `{(w, λ) : |w| <= λ/(ltilde0 + 1)}`; `λ` is the last entry.
///
/// # Safety
/// `x` and `out` must hold `len` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn halpern_project_icecream(
    x: *const f64,
    len: usize,
    ltilde0: f64,
    out: *mut f64,
) -> HalpernStatus {
    guard(|| {
        if len == 0 || !(ltilde0 >= 0.0) {
            return Err(Fail(
                HalpernStatus::InvalidArgument,
                "icecream projection needs len >= 1 and ltilde0 >= 0".into(),
            ));
        }
        let p = project_icecream(slice(x, len, "x")?, ltilde0);
        slice_mut(out, len, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Projection onto the unit `ℓ∞` ball.
///
/// # Safety
/// `x` and `out` must hold `len` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn halpern_project_linf_ball(
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> HalpernStatus {
    guard(|| {
        let p = project_linf_ball(slice(x, len, "x")?);
        slice_mut(out, len, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `center`, `x` and `out` must hold `len` doubles; `x` and `out` may alias.
#[no_mangle]
pub unsafe extern "C" fn halpern_project_euclidean_ball(
    center: *const f64,
    radius: f64,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> HalpernStatus {
    guard(|| {
        if !(radius >= 0.0) {
            return Err(Fail(HalpernStatus::InvalidArgument, "radius must be >= 0".into()));
        }
        let p = project_euclidean_ball(slice(center, len, "center")?, radius, slice(x, len, "x")?);
        slice_mut(out, len, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `lo`, `hi`, `x` and `out` must hold `len` doubles; `x` and `out` may alias.
#[no_mangle]
pub unsafe extern "C" fn halpern_project_box(
    lo: *const f64,
    hi: *const f64,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> HalpernStatus {
    guard(|| {
        let p = project_box(slice(lo, len, "lo")?, slice(hi, len, "hi")?, slice(x, len, "x")?)?;
        slice_mut(out, len, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// `c = α(4 - αL0)/4`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_cocoercivity_modulus(
    alpha: f64,
    l0: f64,
    out: *mut f64,
) -> HalpernStatus {
    guard(|| {
        let c = cocoercivity_modulus(alpha, l0)?;
        *out.as_mut().ok_or_else(|| null("out"))? = c;
        Ok(())
    })
}

/// PAGE probability and batch sizes at iteration `k`. Pass a NaN
/// `z_diff_norm` at `k = 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_page_schedule(
    eps: f64,
    a: f64,
    sigma: f64,
    l0: f64,
    k: usize,
    z_diff_norm: f64,
    out: *mut HalpernPageSchedule,
) -> HalpernStatus {
    guard(|| {
        let d = (!z_diff_norm.is_nan()).then_some(z_diff_norm);
        let s = page_schedule(eps, a, sigma, l0, k, d)?;
        *out.as_mut().ok_or_else(|| null("out"))? = HalpernPageSchedule {
            p: s.p,
            n1: s.n1,
            n2: s.n2.unwrap_or(0),
            sigma_k: s.sigma_k,
        };
        Ok(())
    })
}
