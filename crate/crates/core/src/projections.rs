//! Euclidean projections onto the convex sets used by the DRO builders, and
//! Dykstra's algorithm for their intersections.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::operator::{AccuracyGuarantee, Resolvent};
use crate::point::{dist, norm, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Inside,
    /// Outside, with an estimate of the distance to the set.
    Outside { distance: f64 },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside)
    }
}

/// A closed convex set with a (possibly inexact) projection.
pub trait ConvexSet: Send + Sync {
    fn dim(&self) -> usize;

    fn has_exact_projection(&self) -> bool {
        true
    }

    /// Writes the Euclidean projection of `x` into `out`.
    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Projection to within `gamma`; exact sets return the exact projection.
    fn project_inexact(&self, x: &[f64], gamma: f64, out: &mut [f64]) -> Result<()> {
        let _ = gamma;
        self.project_exact(x, out)
    }

    fn membership(&self, x: &[f64], tol: f64) -> Membership {
        let mut p = vec![0.0; x.len()];
        match self.project_inexact(x, tol, &mut p) {
            Ok(()) => {
                let d = dist(x, &p);
                if d <= tol * 1f64.max(norm(x)) {
                    Membership::Inside
                } else {
                    Membership::Outside { distance: d }
                }
            }
            Err(_) => Membership::Outside {
                distance: f64::INFINITY,
            },
        }
    }

    fn project(&self, x: &[f64]) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        let mut out = Point::zeros(x.len());
        self.project_exact(x, &mut out)?;
        Ok(out)
    }
}

impl<T: ConvexSet + ?Sized> ConvexSet for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn has_exact_projection(&self) -> bool {
        (**self).has_exact_projection()
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).project_exact(x, out)
    }

    fn project_inexact(&self, x: &[f64], gamma: f64, out: &mut [f64]) -> Result<()> {
        (**self).project_inexact(x, gamma, out)
    }
}

/// `sgn(y_i) min{1, |y_i|}` componentwise.
pub fn project_linf_ball(y: &[f64]) -> Point {
    Point::from_vec_unchecked(y.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
}

/// Projection onto the icecream cone `{(w, λ) : |w| <= λ / (L̃0 + 1)}`, with
/// `λ` the last coordinate of `x`.
pub fn project_icecream(x: &[f64], ltilde0: f64) -> Point {
    let mut out = Point::zeros(x.len());
    icecream_into(x, 1.0 / (ltilde0 + 1.0), &mut out);
    out
}

fn icecream_into(x: &[f64], s: f64, out: &mut [f64]) {
    let (w, lam) = x.split_at(x.len() - 1);
    let lam = lam[0];
    let wn = norm(w);
    if wn <= s * lam {
        out.copy_from_slice(x);
    } else if s * wn <= -lam {
        out.fill(0.0);
    } else {
        let rho = (s * wn + lam) / (s * s + 1.0);
        let last = out.len() - 1;
        for (o, wi) in out[..last].iter_mut().zip(w) {
            *o = rho * s * wi / wn;
        }
        out[last] = rho;
    }
}

/// `center + min(1, radius / |y - center|) (y - center)`.
pub fn project_euclidean_ball(center: &[f64], radius: f64, y: &[f64]) -> Point {
    let mut out = Point::zeros(y.len());
    ball_into(center, radius, y, &mut out);
    out
}

fn ball_into(center: &[f64], radius: f64, y: &[f64], out: &mut [f64]) {
    let d = dist(y, center);
    let t = if d > radius { radius / d } else { 1.0 };
    for ((o, yi), ci) in out.iter_mut().zip(y).zip(center) {
        *o = ci + t * (yi - ci);
    }
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box(lo: &[f64], hi: &[f64], y: &[f64]) -> Result<Point> {
    let b = BoxSet::new(lo.to_vec(), hi.to_vec())?;
    b.project(y)
}

/// The ball `{y : |y|_inf <= radius}`.
#[derive(Debug, Clone)]
pub struct LinfBall {
    dim: usize,
    radius: f64,
}

impl LinfBall {
    pub fn unit(dim: usize) -> Self {
        LinfBall { dim, radius: 1.0 }
    }

    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("l-inf ball radius must be positive"));
        }
        Ok(LinfBall { dim, radius })
    }
}

impl ConvexSet for LinfBall {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, v) in out.iter_mut().zip(x) {
            *o = v.clamp(-self.radius, self.radius);
        }
        Ok(())
    }
}

/// `{(w, λ) ∈ R^{d-1} x R : |w| <= λ / (L̃0 + 1)}`.
#[derive(Debug, Clone)]
pub struct IcecreamCone {
    dim: usize,
    ltilde0: f64,
}

impl IcecreamCone {
    /// `dim` counts the `λ` coordinate, so it must be at least 2.
    pub fn new(dim: usize, ltilde0: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("icecream cone needs dimension >= 2"));
        }
        if !(ltilde0 > 0.0) {
            return Err(Error::invalid("cone parameter L~0 must be positive"));
        }
        Ok(IcecreamCone { dim, ltilde0 })
    }

    pub fn slope(&self) -> f64 {
        1.0 / (self.ltilde0 + 1.0)
    }
}

impl ConvexSet for IcecreamCone {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        icecream_into(x, self.slope(), out);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EuclideanBall {
    center: Vec<f64>,
    radius: f64,
}

impl EuclideanBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        Ok(EuclideanBall { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexSet for EuclideanBall {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        ball_into(&self.center, self.radius, x, out);
        Ok(())
    }
}

/// The box `[lo, hi]`; infinite bounds are allowed.
#[derive(Debug, Clone)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::invalid(format!(
                    "box bounds invalid at coordinate {i}: [{l}, {h}]"
                )));
            }
        }
        Ok(BoxSet { lo, hi })
    }

    /// The same interval repeated `blocks` times.
    pub fn repeated(lo: &[f64], hi: &[f64], blocks: usize) -> Result<Self> {
        Self::new(lo.repeat(blocks), hi.repeat(blocks))
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

impl ConvexSet for BoxSet {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (((o, v), l), h) in out.iter_mut().zip(x).zip(&self.lo).zip(&self.hi) {
            *o = v.clamp(*l, *h);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WholeSpace {
    pub dim: usize,
}

impl ConvexSet for WholeSpace {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(x);
        Ok(())
    }
}

/// `S x R^extra`: acts on the leading `inner.dim()` coordinates and leaves
/// the trailing ones untouched. Lifts `Γ ⊆ R^{d-1}` to `Γ x R`.
pub struct Lifted {
    inner: Arc<dyn ConvexSet>,
    extra: usize,
}

impl Lifted {
    pub fn new(inner: Arc<dyn ConvexSet>, extra: usize) -> Self {
        Lifted { inner, extra }
    }
}

impl ConvexSet for Lifted {
    fn dim(&self) -> usize {
        self.inner.dim() + self.extra
    }

    fn has_exact_projection(&self) -> bool {
        self.inner.has_exact_projection()
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.inner.dim();
        self.inner.project_exact(&x[..k], &mut out[..k])?;
        out[k..].copy_from_slice(&x[k..]);
        Ok(())
    }

    fn project_inexact(&self, x: &[f64], gamma: f64, out: &mut [f64]) -> Result<()> {
        let k = self.inner.dim();
        self.inner.project_inexact(&x[..k], gamma, &mut out[..k])?;
        out[k..].copy_from_slice(&x[k..]);
        Ok(())
    }
}

/// Cartesian product of sets acting on consecutive coordinate blocks.
pub struct Product {
    blocks: Vec<Arc<dyn ConvexSet>>,
}

impl Product {
    pub fn new(blocks: Vec<Arc<dyn ConvexSet>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("product of zero sets"));
        }
        Ok(Product { blocks })
    }

    pub fn blocks(&self) -> &[Arc<dyn ConvexSet>] {
        &self.blocks
    }
}

impl ConvexSet for Product {
    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    fn has_exact_projection(&self) -> bool {
        self.blocks.iter().all(|b| b.has_exact_projection())
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut off = 0;
        for b in &self.blocks {
            let k = b.dim();
            b.project_exact(&x[off..off + k], &mut out[off..off + k])?;
            off += k;
        }
        Ok(())
    }

    /// Splits the budget as `gamma / sqrt(#inexact blocks)` so the stacked
    /// error stays within `gamma`.
    fn project_inexact(&self, x: &[f64], gamma: f64, out: &mut [f64]) -> Result<()> {
        let inexact = self
            .blocks
            .iter()
            .filter(|b| !b.has_exact_projection())
            .count()
            .max(1);
        let share = gamma / (inexact as f64).sqrt();
        let mut off = 0;
        for b in &self.blocks {
            let k = b.dim();
            b.project_inexact(&x[off..off + k], share, &mut out[off..off + k])?;
            off += k;
        }
        Ok(())
    }
}

/// Default round limit for [`Intersection`].
pub const DEFAULT_DYKSTRA_ROUNDS: usize = 100_000;

/// Result of a Dykstra run.
#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    pub point: Point,
    pub rounds: usize,
    /// Distance between the last two round iterates.
    pub last_step: f64,
    /// Largest distance from the returned point to a factor set.
    pub max_set_distance: f64,
}

/// Dykstra's alternating projections onto `∩ sets`.
///
/// Stops once both the change between consecutive rounds and the largest
/// distance to any factor set are at most `gamma / 2`. This surrogate does
/// not certify `|P(x) - result| <= gamma`; the caller must also ensure the
/// intersection is non-empty.
pub fn dykstra_project(
    sets: &[Arc<dyn ConvexSet>],
    x: &[f64],
    gamma: f64,
    max_rounds: usize,
) -> Result<Point> {
    dykstra_detailed(sets, x, gamma, max_rounds).map(|o| o.point)
}

pub fn dykstra_detailed(
    sets: &[Arc<dyn ConvexSet>],
    x: &[f64],
    gamma: f64,
    max_rounds: usize,
) -> Result<DykstraOutcome> {
    let first = sets
        .first()
        .ok_or_else(|| Error::invalid("Dykstra needs at least one set"))?;
    let dim = x.len();
    for s in sets {
        check_dim(s.dim(), dim)?;
        if !s.has_exact_projection() {
            return Err(Error::Unsupported(
                "Dykstra factor sets must have exact projections".into(),
            ));
        }
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("Dykstra accuracy must be positive"));
    }
    if sets.len() == 1 {
        let mut out = Point::zeros(dim);
        first.project_exact(x, &mut out)?;
        return Ok(DykstraOutcome {
            point: out,
            rounds: 1,
            last_step: 0.0,
            max_set_distance: 0.0,
        });
    }

    let mut cur = x.to_vec();
    let mut increments = vec![vec![0.0; dim]; sets.len()];
    let mut shifted = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    let half = 0.5 * gamma;
    let mut last_step = f64::INFINITY;
    let mut infeasibility = f64::INFINITY;
    for round in 1..=max_rounds.max(1) {
        let start = cur.clone();
        for (set, inc) in sets.iter().zip(increments.iter_mut()) {
            for ((s, c), p) in shifted.iter_mut().zip(&cur).zip(inc.iter()) {
                *s = c + p;
            }
            set.project_exact(&shifted, &mut next)?;
            for ((p, s), n) in inc.iter_mut().zip(&shifted).zip(&next) {
                *p = s - n;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        last_step = dist(&start, &cur);
        infeasibility = 0.0;
        for set in sets {
            set.project_exact(&cur, &mut probe)?;
            infeasibility = f64::max(infeasibility, dist(&cur, &probe));
        }
        if last_step <= half && infeasibility <= half {
            return Ok(DykstraOutcome {
                point: Point::from_vec_unchecked(cur),
                rounds: round,
                last_step,
                max_set_distance: infeasibility,
            });
        }
    }
    Err(Error::DykstraNotConverged {
        rounds: max_rounds,
        step: last_step,
        infeasibility,
    })
}

/// `∩ sets`, projected with Dykstra's algorithm.
pub struct Intersection {
    sets: Vec<Arc<dyn ConvexSet>>,
    max_rounds: usize,
}

impl Intersection {
    pub fn new(sets: Vec<Arc<dyn ConvexSet>>) -> Result<Self> {
        let dim = sets
            .first()
            .ok_or_else(|| Error::invalid("intersection of zero sets"))?
            .dim();
        for s in &sets {
            check_dim(dim, s.dim())?;
        }
        Ok(Intersection {
            sets,
            max_rounds: DEFAULT_DYKSTRA_ROUNDS,
        })
    }

    pub fn with_max_rounds(mut self, rounds: usize) -> Self {
        self.max_rounds = rounds;
        self
    }

    pub fn sets(&self) -> &[Arc<dyn ConvexSet>] {
        &self.sets
    }
}

impl ConvexSet for Intersection {
    fn dim(&self) -> usize {
        self.sets[0].dim()
    }

    fn has_exact_projection(&self) -> bool {
        self.sets.len() == 1
    }

    fn project_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if self.sets.len() == 1 {
            return self.sets[0].project_exact(x, out);
        }
        Err(Error::MissingExactResolvent)
    }

    fn project_inexact(&self, x: &[f64], gamma: f64, out: &mut [f64]) -> Result<()> {
        // gamma = 0 asks for an exact answer; fall back to a tight surrogate.
        let gamma = if gamma > 0.0 { gamma } else { 1e-12 };
        let o = dykstra_detailed(&self.sets, x, gamma, self.max_rounds).map_err(|e| {
            Error::InexactOracle {
                requested: gamma,
                reason: e.to_string(),
            }
        })?;
        out.copy_from_slice(&o.point);
        Ok(())
    }

    fn membership(&self, x: &[f64], tol: f64) -> Membership {
        let mut p = vec![0.0; x.len()];
        let mut worst: f64 = 0.0;
        for s in &self.sets {
            if s.project_exact(x, &mut p).is_err() {
                return Membership::Outside {
                    distance: f64::INFINITY,
                };
            }
            worst = worst.max(dist(x, &p));
        }
        if worst <= tol * 1f64.max(norm(x)) {
            Membership::Inside
        } else {
            Membership::Outside { distance: worst }
        }
    }
}

/// The resolvent of the normal cone of a convex set, i.e. its projection.
pub struct ProjectionResolvent {
    set: Arc<dyn ConvexSet>,
}

impl ProjectionResolvent {
    pub fn new(set: Arc<dyn ConvexSet>) -> Self {
        ProjectionResolvent { set }
    }

    pub fn set(&self) -> &Arc<dyn ConvexSet> {
        &self.set
    }
}

impl Resolvent for ProjectionResolvent {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn guarantee(&self) -> AccuracyGuarantee {
        if self.set.has_exact_projection() {
            AccuracyGuarantee::Exact
        } else {
            AccuracyGuarantee::Surrogate
        }
    }

    fn evaluate_exact(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.set.has_exact_projection() {
            return Err(Error::MissingExactResolvent);
        }
        self.set.project_exact(x, out)
    }

    fn evaluate_inexact(&self, x: &[f64], accuracy: f64, out: &mut [f64]) -> Result<()> {
        self.set.project_inexact(x, accuracy, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist(a, b) <= tol
    }

    #[test]
    fn linf_examples() {
        assert_eq!(
            project_linf_ball(&[2.0, -0.5, 0.0]).as_slice(),
            &[1.0, -0.5, 0.0]
        );
        assert_eq!(project_linf_ball(&[0.0, 0.0]).as_slice(), &[0.0, 0.0]);
        assert_eq!(project_linf_ball(&[-3.0]).as_slice(), &[-1.0]);
    }

    #[test]
    fn icecream_cases() {
        assert_eq!(
            project_icecream(&[0.4, 0.0, 1.0], 1.0).as_slice(),
            &[0.4, 0.0, 1.0]
        );
        assert_eq!(
            project_icecream(&[0.4, 0.0, -1.0], 1.0).as_slice(),
            &[0.0, 0.0, 0.0]
        );
        let p = project_icecream(&[1.0, 0.0, 0.0], 1.0);
        assert!(close(&p, &[0.2, 0.0, 0.4], 1e-15), "{p:?}");
    }

    #[test]
    fn icecream_third_case_matches_boundary_scan() {
        // Scan boundary points (r·s·e1, r) and the apex for the closest one.
        let x = [1.0, 0.0, 0.0];
        let s = 0.5;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..=2_000_000 {
            let r = j as f64 * 1e-6;
            let d = (x[0] - r * s).powi(2) + (x[2] - r).powi(2);
            if d < best.0 {
                best = (d, r);
            }
        }
        let p = project_icecream(&x, 1.0);
        assert!((p[2] - best.1).abs() < 2e-6);
        assert!((p[0] - best.1 * s).abs() < 2e-6);
    }

    #[test]
    fn ball_examples() {
        let c = [1.0, 2.0];
        assert_eq!(project_euclidean_ball(&c, 1.0, &c).as_slice(), &c);
        let p = project_euclidean_ball(&c, 1.0, &[3.0, 2.0]);
        assert!(close(&p, &[2.0, 2.0], 1e-15));
    }

    #[test]
    fn box_examples() {
        let lo = [-1.0, 0.0];
        let hi = [1.0, 2.0];
        assert_eq!(
            project_box(&lo, &hi, &[0.0, 1.0]).unwrap().as_slice(),
            &[0.0, 1.0]
        );
        assert_eq!(project_box(&lo, &hi, &[5.0, 9.0]).unwrap().as_slice(), &hi);
        assert!(project_box(&[1.0], &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn dykstra_single_set_is_one_projection() {
        let ball: Arc<dyn ConvexSet> = Arc::new(EuclideanBall::new(vec![0.0; 2], 1.0).unwrap());
        let o = dykstra_detailed(&[ball], &[3.0, 4.0], 1e-8, 10).unwrap();
        assert_eq!(o.rounds, 1);
        assert!(close(&o.point, &[0.6, 0.8], 1e-15));
    }

    #[test]
    fn dykstra_interior_point_is_fixed() {
        let ball: Arc<dyn ConvexSet> = Arc::new(EuclideanBall::new(vec![0.0; 2], 1.0).unwrap());
        let bx: Arc<dyn ConvexSet> =
            Arc::new(BoxSet::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap());
        let o = dykstra_detailed(&[ball, bx], &[0.1, -0.2], 1e-8, 10).unwrap();
        assert_eq!(o.rounds, 1);
        assert_eq!(o.point.as_slice(), &[0.1, -0.2]);
    }

    #[test]
    fn dykstra_round_limit_reports_surrogates() {
        let ball: Arc<dyn ConvexSet> = Arc::new(EuclideanBall::new(vec![0.0; 2], 1.0).unwrap());
        let bx: Arc<dyn ConvexSet> = Arc::new(BoxSet::new(vec![0.9, -5.0], vec![5.0, 5.0]).unwrap());
        let err = dykstra_project(&[ball, bx], &[3.0, 3.0], 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::DykstraNotConverged { rounds: 2, .. }));
    }

    #[test]
    fn lifted_and_product_blocks() {
        let gamma: Arc<dyn ConvexSet> = Arc::new(BoxSet::new(vec![0.0], vec![1.0]).unwrap());
        let lifted = Lifted::new(gamma, 1);
        assert_eq!(lifted.project(&[2.0, -7.0]).unwrap().as_slice(), &[1.0, -7.0]);
        let prod = Product::new(vec![
            Arc::new(LinfBall::unit(2)),
            Arc::new(EuclideanBall::new(vec![0.0], 1.0).unwrap()),
        ])
        .unwrap();
        assert_eq!(
            prod.project(&[3.0, 0.5, -4.0]).unwrap().as_slice(),
            &[1.0, 0.5, -1.0]
        );
    }

    #[test]
    fn membership_reports_distance() {
        let b = BoxSet::new(vec![0.0], vec![1.0]).unwrap();
        assert!(b.membership(&[0.5], 1e-12).is_inside());
        match b.membership(&[3.0], 1e-12) {
            Membership::Outside { distance } => assert_eq!(distance, 2.0),
            m => panic!("{m:?}"),
        }
    }
}
