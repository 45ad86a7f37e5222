//! Operators, resolvents, the finite-sum inclusion `0 ∈ E(z) + (1/N) Σ F_i(z)`
//! and its forward-backward residual
//!
//! ```text
//! G(z) = (z - J_{αE}(z - (α/N) Σ F_i(z))) / α
//! ```
//!
//! Set-valued operators never appear explicitly: the set-valued part `E` is
//! only ever touched through its resolvent `J_{αE}`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::point::{axpy, dot, Point};

/// Default relative slack for floating-point comparisons of exact identities.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// A single-valued operator `Z -> Z`.
///
/// Implementations must be deterministic and pure so that they can be shared
/// across threads.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes the operator value at `z` into `out`. Both slices have length
    /// [`Operator::dim`].
    fn apply_into(&self, z: &[f64], out: &mut [f64]);

    fn apply(&self, z: &[f64]) -> Result<Point> {
        check_dim(self.dim(), z.len())?;
        let mut out = Point::zeros(self.dim());
        self.apply_into(z, &mut out);
        Ok(out)
    }
}

impl<T: Operator + ?Sized> Operator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        (**self).apply_into(z, out)
    }
}

impl<T: Operator + ?Sized> Operator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        (**self).apply_into(z, out)
    }
}

/// Adapts a closure into an [`Operator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F> Operator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        (self.f)(z, out)
    }
}

/// The affine map `z ↦ A z - b` with a dense square matrix.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    matrix: nalgebra::DMatrix<f64>,
    shift: Vec<f64>,
}

impl AffineOperator {
    pub fn new(matrix: nalgebra::DMatrix<f64>, shift: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("affine operator matrix must be square"));
        }
        check_dim(matrix.nrows(), shift.len())?;
        Ok(AffineOperator { matrix, shift })
    }

    pub fn linear(matrix: nalgebra::DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, vec![0.0; n])
    }

    pub fn matrix(&self) -> &nalgebra::DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Largest singular value of the matrix.
    pub fn operator_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.max()
    }
}

impl Operator for AffineOperator {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.shift.len();
        for (r, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = -self.shift[r];
            for c in 0..n {
                acc += self.matrix[(r, c)] * z[c];
            }
            *o = acc;
        }
    }
}

/// The component family `F_1, ..., F_N` of a finite-sum inclusion.
///
/// Components are addressed by index so that sparse families (where `F_i`
/// touches only a few coordinates) can accumulate without materialising a
/// dense vector per component.
pub trait ComponentOperators: Send + Sync {
    fn dim(&self) -> usize;

    fn count(&self) -> usize;

    /// `out += scale * F_i(z)`.
    fn accumulate(&self, i: usize, z: &[f64], scale: f64, out: &mut [f64]);

    /// `out += scale * (F_i(z) - F_i(z_prev))`.
    fn accumulate_difference(
        &self,
        i: usize,
        z: &[f64],
        z_prev: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        self.accumulate(i, z, scale, out);
        self.accumulate(i, z_prev, -scale, out);
    }

    fn evaluate(&self, i: usize, z: &[f64]) -> Result<Point> {
        if i >= self.count() {
            return Err(Error::IndexOutOfRange {
                index: i,
                count: self.count(),
            });
        }
        check_dim(self.dim(), z.len())?;
        let mut out = Point::zeros(self.dim());
        self.accumulate(i, z, 1.0, &mut out);
        Ok(out)
    }

    /// Writes `F(z) = (1/N) Σ F_i(z)` into `out`, summing in index order.
    fn mean_into(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let scale = 1.0 / self.count() as f64;
        for i in 0..self.count() {
            self.accumulate(i, z, scale, out);
        }
    }
}

impl<T: ComponentOperators + ?Sized> ComponentOperators for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn count(&self) -> usize {
        (**self).count()
    }

    fn accumulate(&self, i: usize, z: &[f64], scale: f64, out: &mut [f64]) {
        (**self).accumulate(i, z, scale, out)
    }

    fn accumulate_difference(
        &self,
        i: usize,
        z: &[f64],
        z_prev: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        (**self).accumulate_difference(i, z, z_prev, scale, out)
    }
}

/// A component family stored as a list of dense operators.
pub struct OperatorList {
    dim: usize,
    ops: Vec<Arc<dyn Operator>>,
}

impl OperatorList {
    pub fn new(ops: Vec<Arc<dyn Operator>>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::invalid("component list must be non-empty"))?;
        let dim = first.dim();
        for op in &ops {
            check_dim(dim, op.dim())?;
        }
        Ok(OperatorList { dim, ops })
    }
}

impl ComponentOperators for OperatorList {
    fn dim(&self) -> usize {
        self.dim
    }

    fn count(&self) -> usize {
        self.ops.len()
    }

    fn accumulate(&self, i: usize, z: &[f64], scale: f64, out: &mut [f64]) {
        let mut buf = vec![0.0; self.dim];
        self.ops[i].apply_into(z, &mut buf);
        axpy(scale, &buf, out);
    }
}

/// How far a resolvent's inexact evaluation can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyGuarantee {
    /// Closed-form evaluation; the inexact oracle returns the exact value.
    Exact,
    /// The returned point is provably within the requested accuracy.
    Certified,
    /// A stopping surrogate is met; the true error is not bounded.
    Surrogate,
}

/// The resolvent `J_{αE} = (I + αE)^{-1}` of the set-valued part.
pub trait Resolvent: Send + Sync {
    fn dim(&self) -> usize;

    fn guarantee(&self) -> AccuracyGuarantee;

    fn is_exact(&self) -> bool {
        self.guarantee() == AccuracyGuarantee::Exact
    }

    /// Exact evaluation. Fails with [`Error::MissingExactResolvent`] when the
    /// resolvent has no closed form.
    fn evaluate_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Evaluation with `|J(x) - out| <= accuracy`. The default delegates to
    /// the exact map.
    fn evaluate_inexact(&self, x: &[f64], accuracy: f64, out: &mut [f64]) -> Result<()> {
        let _ = accuracy;
        self.evaluate_exact(x, out)
    }
}

impl<T: Resolvent + ?Sized> Resolvent for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn guarantee(&self) -> AccuracyGuarantee {
        (**self).guarantee()
    }

    fn evaluate_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).evaluate_exact(x, out)
    }

    fn evaluate_inexact(&self, x: &[f64], accuracy: f64, out: &mut [f64]) -> Result<()> {
        (**self).evaluate_inexact(x, accuracy, out)
    }
}

/// Resolvent of `E ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityResolvent {
    pub dim: usize,
}

impl Resolvent for IdentityResolvent {
    fn dim(&self) -> usize {
        self.dim
    }

    fn guarantee(&self) -> AccuracyGuarantee {
        AccuracyGuarantee::Exact
    }

    fn evaluate_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(x);
        Ok(())
    }
}

/// Views an exact resolvent as an operator (for firm-nonexpansiveness checks).
pub struct ResolventOperator<R>(pub R);

impl<R: Resolvent> Operator for ResolventOperator<R> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        self.0
            .evaluate_exact(z, out)
            .expect("ResolventOperator requires an exact resolvent");
    }
}

/// The inclusion `0 ∈ E(z) + (1/N) Σ F_i(z)` together with the step `α`.
#[derive(Clone)]
pub struct FiniteSumInclusion {
    resolvent: Arc<dyn Resolvent>,
    components: Arc<dyn ComponentOperators>,
    l0: f64,
    alpha: f64,
}

impl std::fmt::Debug for FiniteSumInclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteSumInclusion")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("l0", &self.l0)
            .field("alpha", &self.alpha)
            .field("resolvent", &self.resolvent.guarantee())
            .finish()
    }
}

impl FiniteSumInclusion {
    /// `l0` is the co-coercivity constant shared by every `F_i`; `alpha`
    /// must lie strictly inside `(0, 4/l0)`.
    pub fn new(
        resolvent: Arc<dyn Resolvent>,
        components: Arc<dyn ComponentOperators>,
        l0: f64,
        alpha: f64,
    ) -> Result<Self> {
        if components.count() == 0 {
            return Err(Error::invalid("finite-sum inclusion needs N >= 1 components"));
        }
        check_dim(components.dim(), resolvent.dim())?;
        validate_step(alpha, l0)?;
        Ok(FiniteSumInclusion {
            resolvent,
            components,
            l0,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn n(&self) -> usize {
        self.components.count()
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn resolvent(&self) -> &Arc<dyn Resolvent> {
        &self.resolvent
    }

    pub fn components(&self) -> &Arc<dyn ComponentOperators> {
        &self.components
    }

    /// `F(z) = (1/N) Σ F_i(z)`.
    pub fn mean_operator(&self, z: &[f64]) -> Result<Point> {
        check_dim(self.dim(), z.len())?;
        let mut out = Point::zeros(self.dim());
        self.components.mean_into(z, &mut out);
        Ok(out)
    }

    /// Co-coercivity parameter of the residual `G`.
    pub fn residual_modulus(&self) -> f64 {
        self.alpha * (4.0 - self.alpha * self.l0) / 4.0
    }

    /// Step constant `L` such that `G` is `1/L`-co-coercive.
    pub fn step_constant(&self) -> f64 {
        1.0 / self.residual_modulus()
    }

    /// `(z - z̄) / α` for a forward point `F̃` and a resolvent image `z̄`.
    pub(crate) fn residual_from_resolvent(&self, z: &[f64], zbar: &[f64]) -> Point {
        Point::from_vec_unchecked(
            z.iter()
                .zip(zbar)
                .map(|(a, b)| (a - b) / self.alpha)
                .collect(),
        )
    }

    /// `z - α v`
    pub(crate) fn forward_point(&self, z: &[f64], v: &[f64]) -> Vec<f64> {
        z.iter().zip(v).map(|(a, b)| a - self.alpha * b).collect()
    }
}

fn validate_step(alpha: f64, l0: f64) -> Result<()> {
    if !(l0 > 0.0 && l0.is_finite()) {
        return Err(Error::invalid(format!("L0 must be positive, got {l0}")));
    }
    let upper = 4.0 / l0;
    if !(alpha > 0.0 && alpha < upper) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 4/L0) = (0, {upper}), got {alpha}"
        )));
    }
    Ok(())
}

/// Exact forward-backward residual `G(z)`.
pub fn residual_exact(prob: &FiniteSumInclusion, z: &[f64]) -> Result<Point> {
    check_dim(prob.dim(), z.len())?;
    if !prob.resolvent.is_exact() {
        return Err(Error::MissingExactResolvent);
    }
    let f = prob.mean_operator(z)?;
    let x = prob.forward_point(z, &f);
    let mut zbar = vec![0.0; z.len()];
    prob.resolvent.evaluate_exact(&x, &mut zbar)?;
    Ok(prob.residual_from_resolvent(z, &zbar))
}

/// Approximate residual `z̃` with `|G(z) - z̃| <= gamma`, obtained by asking
/// the resolvent for accuracy `α·gamma` (the forward part is exact).
pub fn residual_inexact(prob: &FiniteSumInclusion, z: &[f64], gamma: f64) -> Result<Point> {
    check_dim(prob.dim(), z.len())?;
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    let f = prob.mean_operator(z)?;
    let x = prob.forward_point(z, &f);
    let mut zbar = vec![0.0; z.len()];
    prob.resolvent
        .evaluate_inexact(&x, prob.alpha * gamma, &mut zbar)
        .map_err(|e| match e {
            Error::InexactOracle { reason, .. } => Error::InexactOracle {
                requested: gamma,
                reason,
            },
            other => other,
        })?;
    Ok(prob.residual_from_resolvent(z, &zbar))
}

/// The residual `G` of an inclusion with an exact resolvent, as an operator.
pub struct ResidualOperator {
    prob: FiniteSumInclusion,
}

impl ResidualOperator {
    pub fn new(prob: FiniteSumInclusion) -> Result<Self> {
        if !prob.resolvent.is_exact() {
            return Err(Error::MissingExactResolvent);
        }
        Ok(ResidualOperator { prob })
    }

    pub fn problem(&self) -> &FiniteSumInclusion {
        &self.prob
    }
}

impl Operator for ResidualOperator {
    fn dim(&self) -> usize {
        self.prob.dim()
    }

    fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        let mut f = vec![0.0; z.len()];
        self.prob.components.mean_into(z, &mut f);
        let x = self.prob.forward_point(z, &f);
        self.prob
            .resolvent
            .evaluate_exact(&x, out)
            .expect("exact resolvent checked at construction");
        for (o, zi) in out.iter_mut().zip(z) {
            *o = (zi - *o) / self.prob.alpha;
        }
    }
}

/// Co-coercivity parameter `c = α(4 - αL0)/4` of the forward-backward
/// residual when every `F_i` is `1/L0`-co-coercive. The drivers use the step
/// constant `L = 1/c`.
pub fn cocoercivity_modulus(alpha: f64, l0: f64) -> Result<f64> {
    validate_step(alpha, l0)?;
    Ok(alpha * (4.0 - alpha * l0) / 4.0)
}

/// Settings for [`check_cocoercive_with`].
#[derive(Debug, Clone, Copy)]
pub struct CocoercivityCheck {
    pub n_pairs: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian sampling distribution.
    pub scale: f64,
    /// Relative slack; the absolute slack is `tol * max(1, |lhs|, |rhs|)`.
    pub tol: f64,
}

impl Default for CocoercivityCheck {
    fn default() -> Self {
        CocoercivityCheck {
            n_pairs: 10_000,
            seed: 0,
            scale: 1.0,
            tol: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocoercivityReport {
    pub pairs: usize,
    pub violations: usize,
    /// Smallest observed `<Gx - Gy, x - y> - c |Gx - Gy|^2`.
    pub worst_margin: f64,
}

impl CocoercivityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `n_pairs` Gaussian point pairs and counts violations of
/// `<G(x) - G(y), x - y> >= c |G(x) - G(y)|^2`.
pub fn check_cocoercive(
    op: &dyn Operator,
    c: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<CocoercivityReport> {
    check_cocoercive_with(
        op,
        c,
        CocoercivityCheck {
            n_pairs,
            seed,
            ..Default::default()
        },
    )
}

pub fn check_cocoercive_with(
    op: &dyn Operator,
    c: f64,
    opts: CocoercivityCheck,
) -> Result<CocoercivityReport> {
    if opts.n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be >= 1"));
    }
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut gx = vec![0.0; dim];
    let mut gy = vec![0.0; dim];
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..opts.n_pairs {
        for v in x.iter_mut().chain(y.iter_mut()) {
            let s: f64 = StandardNormal.sample(&mut rng);
            *v = opts.scale * s;
        }
        op.apply_into(&x, &mut gx);
        op.apply_into(&y, &mut gy);
        let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
        let dz: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let lhs = dot(&dg, &dz);
        let rhs = c * dot(&dg, &dg);
        let margin = lhs - rhs;
        worst = worst.min(margin);
        if margin < -opts.tol * 1f64.max(lhs.abs()).max(rhs.abs()) {
            violations += 1;
        }
    }
    Ok(CocoercivityReport {
        pairs: opts.n_pairs,
        violations,
        worst_margin: worst,
    })
}
