use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::operator::{ComponentOperators, FiniteSumInclusion};
use crate::point::{dist, Point};
use crate::projections::{BoxSet, ConvexSet, EuclideanBall, Intersection, Product, ProjectionResolvent};

/// A smooth convex-concave loss `ℓ(x, ξ)`.
pub trait SaddleLoss: Send + Sync {
    fn x_dim(&self) -> usize;

    fn xi_dim(&self) -> usize;

    fn value(&self, x: &[f64], xi: &[f64]) -> f64;

    /// Writes `∇_x ℓ(x, ξ)` into `out`.
    fn grad_x(&self, x: &[f64], xi: &[f64], out: &mut [f64]);

    /// Writes `∇_ξ ℓ(x, ξ)` into `out`.
    fn grad_xi(&self, x: &[f64], xi: &[f64], out: &mut [f64]);

    /// Order `q` with `ℓ(x, ξ) <= C(x) (1 + |ξ|^q)`, if known.
    fn upper_growth_order(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &str {
        "custom"
    }
}

/// `ℓ(x, ξ) = <x, ξ>`, 1-smooth.
#[derive(Debug, Clone, Copy)]
pub struct BilinearLoss {
    pub dim: usize,
}

impl SaddleLoss for BilinearLoss {
    fn x_dim(&self) -> usize {
        self.dim
    }

    fn xi_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        crate::point::dot(x, xi)
    }

    fn grad_x(&self, _x: &[f64], xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(xi);
    }

    fn grad_xi(&self, x: &[f64], _xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn upper_growth_order(&self) -> Option<f64> {
        Some(1.0)
    }

    fn name(&self) -> &str {
        "bilinear"
    }
}

/// `ℓ(x, ξ) = (μx/2)|x|² + xᵀBξ - (μξ/2)|ξ|²`.
#[derive(Debug, Clone)]
pub struct QuadraticSaddleLoss {
    pub mu_x: f64,
    pub mu_xi: f64,
    /// `x_dim x xi_dim`
    pub b: nalgebra::DMatrix<f64>,
}

impl QuadraticSaddleLoss {
    pub fn new(mu_x: f64, mu_xi: f64, b: nalgebra::DMatrix<f64>) -> Result<Self> {
        if !(mu_x >= 0.0 && mu_xi >= 0.0) {
            return Err(Error::invalid("curvatures must be nonnegative"));
        }
        Ok(QuadraticSaddleLoss { mu_x, mu_xi, b })
    }

    /// `max(μx, μξ) + |B|`, an upper bound on the gradient Lipschitz constant.
    pub fn smoothness_bound(&self) -> f64 {
        self.mu_x.max(self.mu_xi) + self.b.clone().singular_values().max()
    }
}

impl SaddleLoss for QuadraticSaddleLoss {
    fn x_dim(&self) -> usize {
        self.b.nrows()
    }

    fn xi_dim(&self) -> usize {
        self.b.ncols()
    }

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let mut bxi = 0.0;
        for r in 0..self.b.nrows() {
            for c in 0..self.b.ncols() {
                bxi += x[r] * self.b[(r, c)] * xi[c];
            }
        }
        0.5 * self.mu_x * crate::point::dot(x, x) + bxi - 0.5 * self.mu_xi * crate::point::dot(xi, xi)
    }

    fn grad_x(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = self.mu_x * x[r];
            for (c, v) in xi.iter().enumerate() {
                s += self.b[(r, c)] * v;
            }
            *o = s;
        }
    }

    fn grad_xi(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = -self.mu_xi * xi[c];
            for (r, v) in x.iter().enumerate() {
                s += self.b[(r, c)] * v;
            }
            *o = s;
        }
    }

    fn upper_growth_order(&self) -> Option<f64> {
        if self.mu_xi > 0.0 {
            Some(0.0)
        } else {
            Some(1.0)
        }
    }

    fn name(&self) -> &str {
        "quadratic-bilinear"
    }
}

/// Transport metric `d` on `Ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Euclidean,
    Other(String),
}

/// Support set `Ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Whole,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// Specification of a Wasserstein DRO problem with a convex-concave loss.
#[derive(Clone)]
pub struct CcLossSpec {
    pub loss: Arc<dyn SaddleLoss>,
    /// Smoothness constant of `ℓ`, supplied by the caller.
    pub l0: f64,
    pub theta: f64,
    pub p: f64,
    pub metric: Metric,
    pub support: Support,
    /// Declared convexity of `Ξ` (only relevant for the duality note).
    pub support_convex: bool,
    /// Feasible set `𝒳`, assumed compact.
    pub x_set: Arc<dyn ConvexSet>,
}

impl CcLossSpec {
    pub fn new(loss: Arc<dyn SaddleLoss>, l0: f64, theta: f64, x_set: Arc<dyn ConvexSet>) -> Self {
        CcLossSpec {
            loss,
            l0,
            theta,
            p: 2.0,
            metric: Metric::Euclidean,
            support: Support::Whole,
            support_convex: true,
            x_set,
        }
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }
}

/// Saddle components `F_i(z) = (∇_x ℓ(x, ξ_i); -∇_ξ ℓ(x, ξ_i) e_i)` on
/// `z = (x, ξ_1, ..., ξ_N)`.
pub struct CcComponents {
    loss: Arc<dyn SaddleLoss>,
    n: usize,
}

impl CcComponents {
    pub fn new(loss: Arc<dyn SaddleLoss>, n: usize) -> Self {
        CcComponents { loss, n }
    }

    fn block(&self, i: usize) -> std::ops::Range<usize> {
        let nx = self.loss.x_dim();
        let d = self.loss.xi_dim();
        nx + i * d..nx + (i + 1) * d
    }
}

impl ComponentOperators for CcComponents {
    fn dim(&self) -> usize {
        self.loss.x_dim() + self.n * self.loss.xi_dim()
    }

    fn count(&self) -> usize {
        self.n
    }

    fn accumulate(&self, i: usize, z: &[f64], scale: f64, out: &mut [f64]) {
        let nx = self.loss.x_dim();
        let x = &z[..nx];
        let blk = self.block(i);
        let xi = &z[blk.clone()];
        let mut gx = vec![0.0; nx];
        let mut gxi = vec![0.0; xi.len()];
        self.loss.grad_x(x, xi, &mut gx);
        self.loss.grad_xi(x, xi, &mut gxi);
        crate::point::axpy(scale, &gx, &mut out[..nx]);
        crate::point::axpy(-scale, &gxi, &mut out[blk]);
    }
}

pub struct CcProblem {
    pub inclusion: FiniteSumInclusion,
    pub n: usize,
    pub x_dim: usize,
    pub xi_dim: usize,
    /// Whether the projection onto `𝒴` is exact (otherwise Dykstra).
    pub y_projection_exact: bool,
    y_hat: Vec<f64>,
}

impl CcProblem {
    /// `(x0, ŷ)`.
    pub fn initial_point(&self, x0: &[f64]) -> Result<Point> {
        check_dim(self.x_dim, x0.len())?;
        let mut z = x0.to_vec();
        z.extend_from_slice(&self.y_hat);
        Point::new(z)
    }

    pub fn y_hat(&self) -> &[f64] {
        &self.y_hat
    }
}

/// Largest observed `|∇ℓ(z1) - ∇ℓ(z2)| / |z1 - z2|` over Gaussian pairs.
pub fn empirical_smoothness(loss: &dyn SaddleLoss, pairs: usize, seed: u64) -> f64 {
    let nx = loss.x_dim();
    let d = loss.xi_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let grad = |z: &[f64]| {
        let mut g = vec![0.0; nx + d];
        loss.grad_x(&z[..nx], &z[nx..], &mut g[..nx]);
        loss.grad_xi(&z[..nx], &z[nx..], &mut g[nx..]);
        g
    };
    for _ in 0..pairs {
        let a: Vec<f64> = (0..nx + d).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..nx + d).map(|_| rng.sample(StandardNormal)).collect();
        let den = dist(&a, &b);
        if den > 0.0 {
            worst = worst.max(dist(&grad(&a), &grad(&b)) / den);
        }
    }
    worst
}

/// Assembles `0 ∈ F(z) + N_{𝒳 x 𝒴}(z)` with
/// `𝒴 = {y : Σ|ξ_i - ξ̂_i|² <= Nθ²} ∩ Ξ^N`.
pub fn build_wdro_cc_problem(data: &[Vec<f64>], spec: &CcLossSpec, alpha: f64) -> Result<CcProblem> {
    if spec.p != 2.0 || spec.metric != Metric::Euclidean {
        return Err(Error::Unsupported(format!(
            "only p = 2 with the Euclidean metric has an exact ball projection (got p = {}, metric {:?})",
            spec.p, spec.metric
        )));
    }
    if data.is_empty() {
        return Err(Error::invalid("no reference samples"));
    }
    if !(spec.theta > 0.0 && spec.theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be positive, got {}", spec.theta)));
    }
    let loss = spec.loss.clone();
    let (nx, d, n) = (loss.x_dim(), loss.xi_dim(), data.len());
    check_dim(nx, spec.x_set.dim())?;
    let mut y_hat = Vec::with_capacity(n * d);
    for row in data {
        check_dim(d, row.len())?;
        y_hat.extend_from_slice(row);
    }
    let empirical = empirical_smoothness(loss.as_ref(), 200, 0x5eed);
    if empirical > spec.l0 * (1.0 + 1e-9) {
        log::warn!(
            "supplied L0 = {} is below an observed gradient Lipschitz ratio {empirical}",
            spec.l0
        );
    }
    let ball: Arc<dyn ConvexSet> =
        Arc::new(EuclideanBall::new(y_hat.clone(), (n as f64).sqrt() * spec.theta)?);
    let (yset, exact): (Arc<dyn ConvexSet>, bool) = match &spec.support {
        Support::Whole => (ball, true),
        Support::Box { lo, hi } => {
            check_dim(d, lo.len())?;
            check_dim(d, hi.len())?;
            let bx: Arc<dyn ConvexSet> = Arc::new(BoxSet::repeated(lo, hi, n)?);
            (Arc::new(Intersection::new(vec![ball, bx])?), false)
        }
    };
    let set = Arc::new(Product::new(vec![spec.x_set.clone(), yset])?);
    let inclusion = FiniteSumInclusion::new(
        Arc::new(ProjectionResolvent::new(set)),
        Arc::new(CcComponents::new(loss, n)),
        spec.l0,
        alpha,
    )?;
    Ok(CcProblem {
        inclusion,
        n,
        x_dim: nx,
        xi_dim: d,
        y_projection_exact: exact,
        y_hat,
    })
}

/// The strong-duality hypothesis behind the reformulation, as a record for
/// the user. Nothing here is verified numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthNote {
    pub assumption: String,
    /// `Some(true)` when the loss's declared growth order is at most `p`.
    pub satisfiable: Option<bool>,
    pub warnings: Vec<String>,
}

pub fn growth_condition_note(spec: &CcLossSpec) -> GrowthNote {
    let assumption = format!(
        "the reformulation needs a convex support set and, for every x, \
         limsup (l(x, xi) - l(x, xi0)) / d(xi, xi0)^p < infinity as d(xi, xi0) -> infinity (p = {})",
        spec.p
    );
    let mut warnings = Vec::new();
    if !spec.support_convex {
        warnings.push("support set declared nonconvex: strong duality may fail".to_string());
    }
    let satisfiable = match spec.loss.upper_growth_order() {
        Some(q) => {
            if q < spec.p {
                log::debug!(
                    "{} loss grows with order {q} < p = {}; the growth ratio tends to 0",
                    spec.loss.name(),
                    spec.p
                );
            }
            Some(q <= spec.p)
        }
        None => {
            warnings.push("loss growth order unknown: growth condition not checked".to_string());
            None
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    GrowthNote {
        assumption,
        satisfiable,
        warnings,
    }
}
