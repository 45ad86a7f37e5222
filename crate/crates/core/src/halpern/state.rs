use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::operator::{FiniteSumInclusion, Operator};
use crate::page::{PageDraw, PageState};
use crate::point::Point;

use super::oracle::InexactResidual;
use super::schedule::ToleranceSchedule;

/// Iterates whose norm exceeds this multiple of `max(|z^0|, 1)` abort the run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Choice of `(β_k, η_k)`.
#[derive(Clone, Default)]
pub enum ParameterRule {
    /// `β_k = 1/(k+2)`, `η_k = (1 - β_k)/L`.
    #[default]
    Standard,
    /// Caller-supplied `k ↦ (β_k, η_k)`. Rate certificates do not apply.
    Override(Arc<dyn Fn(usize) -> (f64, f64) + Send + Sync>),
}

impl fmt::Debug for ParameterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParameterRule::Standard => f.write_str("Standard"),
            ParameterRule::Override(_) => f.write_str("Override(..)"),
        }
    }
}

/// One applied update `z^k -> z^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub beta: f64,
    pub eta: f64,
    pub z_before: Point,
    pub z_after: Point,
    /// The residual value used in the update.
    pub ztilde: Point,
}

impl StepRecord {
    pub fn step_norm(&self) -> f64 {
        crate::point::dist(&self.z_after, &self.z_before)
    }
}

#[derive(Debug, Clone)]
pub struct HalpernState {
    k: usize,
    z0: Point,
    z: Point,
    z_prev: Option<Point>,
    l: f64,
    rule: ParameterRule,
    last_ztilde: Option<Point>,
    guard: f64,
}

impl HalpernState {
    /// Starts at the anchor `z0` with step constant `l` (`G` is
    /// `1/l`-co-coercive).
    pub fn new(z0: Point, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("step constant L must be positive, got {l}")));
        }
        if !z0.is_finite() {
            return Err(Error::invalid("initial point must be finite"));
        }
        let guard = DIVERGENCE_FACTOR * z0.norm().max(1.0);
        Ok(HalpernState {
            k: 0,
            z: z0.clone(),
            z0,
            z_prev: None,
            l,
            rule: ParameterRule::Standard,
            last_ztilde: None,
            guard,
        })
    }

    /// State for the stochastic driver; `L` is derived from `α` and `L0`.
    pub fn for_problem(prob: &FiniteSumInclusion, z0: Point) -> Result<Self> {
        check_dim(prob.dim(), z0.dim())?;
        Self::new(z0, prob.step_constant())
    }

    pub fn with_parameter_rule(mut self, rule: ParameterRule) -> Self {
        self.rule = rule;
        self
    }

    /// Whether the standard parameters (and hence the certificates) apply.
    pub fn certified(&self) -> bool {
        matches!(self.rule, ParameterRule::Standard)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn z0(&self) -> &Point {
        &self.z0
    }

    pub fn z(&self) -> &Point {
        &self.z
    }

    pub fn z_prev(&self) -> Option<&Point> {
        self.z_prev.as_ref()
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn last_ztilde(&self) -> Option<&Point> {
        self.last_ztilde.as_ref()
    }

    pub fn beta(&self) -> f64 {
        self.parameters().0
    }

    pub fn eta(&self) -> f64 {
        self.parameters().1
    }

    fn parameters(&self) -> (f64, f64) {
        match &self.rule {
            ParameterRule::Standard => {
                let beta = 1.0 / (self.k as f64 + 2.0);
                (beta, (1.0 - beta) / self.l)
            }
            ParameterRule::Override(f) => f(self.k),
        }
    }

    /// `𝓛_k` evaluated with `g` standing in for `G(z^k)`.
    pub fn potential(&self, g: &[f64]) -> f64 {
        super::diagnostics::potential_value(self.k, self.l, &self.z0, &self.z, g)
    }

    /// Applies `z^{k+1} = β_k z^0 + (1 - β_k) z^k - η_k z̃` and advances `k`.
    pub fn advance(&mut self, ztilde: Point) -> Result<StepRecord> {
        check_dim(self.z.dim(), ztilde.dim())?;
        let (beta, eta) = self.parameters();
        let next: Vec<f64> = self
            .z0
            .iter()
            .zip(self.z.iter())
            .zip(ztilde.iter())
            .map(|((a, z), g)| beta * a + (1.0 - beta) * z - eta * g)
            .collect();
        let next = Point::from_vec_unchecked(next);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                k: self.k,
                detail: format!(
                    "|z^k| = {:e}, |z̃^k| = {:e}, beta = {beta}, eta = {eta}",
                    self.z.norm(),
                    ztilde.norm()
                ),
            });
        }
        let norm = next.norm();
        if norm > self.guard {
            return Err(Error::Diverged {
                k: self.k + 1,
                norm,
                limit: self.guard,
            });
        }
        let before = std::mem::replace(&mut self.z, next);
        let record = StepRecord {
            k: self.k,
            beta,
            eta,
            z_before: before.clone(),
            z_after: self.z.clone(),
            ztilde: ztilde.clone(),
        };
        self.z_prev = Some(before);
        self.last_ztilde = Some(ztilde);
        self.k += 1;
        Ok(record)
    }
}

/// One exact step with `z̃^k = G(z^k)`.
pub fn step_exact(state: &mut HalpernState, g: &dyn Operator) -> Result<StepRecord> {
    let gz = g.apply(state.z())?;
    if !gz.is_finite() {
        return Err(Error::NonFinite {
            k: state.k(),
            detail: "operator returned a non-finite value".into(),
        });
    }
    state.advance(gz)
}

/// One inexact step with `|G(z^k) - z̃^k| <= γ_k`.
pub fn step_inexact(
    state: &mut HalpernState,
    oracle: &mut dyn InexactResidual,
    schedule: &ToleranceSchedule,
) -> Result<StepRecord> {
    let gamma = schedule.gamma(state.k());
    let zt = oracle.residual(state.z(), gamma)?;
    state.advance(zt)
}

/// One stochastic step: PAGE estimate `F̃(z^k)`, resolvent point `z̄^k`
/// within `(√2/2) α γ_k`, then `z̃^k = (z^k - z̄^k)/α`.
pub fn step_stochastic(
    state: &mut HalpernState,
    prob: &FiniteSumInclusion,
    page: &mut PageState,
    gamma: &ToleranceSchedule,
) -> Result<(StepRecord, PageDraw)> {
    if page.k() != state.k() {
        return Err(Error::invalid(format!(
            "PAGE state at k={} but Halpern state at k={}",
            page.k(),
            state.k()
        )));
    }
    if state.certified() {
        let expected = prob.step_constant();
        if (state.l() - expected).abs() > 1e-12 * expected {
            return Err(Error::invalid(format!(
                "stochastic driver needs L = 1/(α(4-αL0)/4) = {expected}, state has {}",
                state.l()
            )));
        }
    }
    let draw = page.update(prob.components().as_ref(), state.z())?;
    let est = page.estimate().expect("update sets the estimate");
    let x = prob.forward_point(state.z(), est);
    let accuracy = FRAC_1_SQRT_2 * prob.alpha() * gamma.gamma(state.k());
    let mut zbar = vec![0.0; x.len()];
    prob.resolvent().evaluate_inexact(&x, accuracy, &mut zbar)?;
    let zt = prob.residual_from_resolvent(state.z(), &zbar);
    let rec = state.advance(zt)?;
    Ok((rec, draw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::FnOperator;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn initial_parameters() {
        let s = HalpernState::new(p(&[1.0]), 4.0).unwrap();
        assert_eq!(s.beta(), 0.5);
        assert_eq!(s.eta(), 0.125);
    }

    #[test]
    fn identity_first_step_halves() {
        let g = FnOperator::new(2, |z, out| out.copy_from_slice(z));
        let mut s = HalpernState::new(p(&[2.0, -6.0]), 1.0).unwrap();
        step_exact(&mut s, &g).unwrap();
        assert_eq!(s.z().as_slice(), &[1.0, -3.0]);
        assert_eq!(s.k(), 1);
    }

    #[test]
    fn zero_operator_keeps_anchor() {
        let g = FnOperator::new(3, |_, out| out.fill(0.0));
        let z0 = p(&[0.5, 1.5, -2.0]);
        let mut s = HalpernState::new(z0.clone(), 3.0).unwrap();
        for _ in 0..25 {
            step_exact(&mut s, &g).unwrap();
            assert!(crate::point::dist(s.z(), &z0) <= 1e-14);
        }
    }

    #[test]
    fn scalar_recursion_in_exact_rationals() {
        // G(z) = z - z*, L = 1, z0 = z* + 1. With u_k = z^k - z*:
        // u_{k+1} = β_k u_0 + (1-β_k) u_k - (1-β_k) u_k = u_0/(k+2).
        // So u_k = 1/(k+1) exactly; compare numerators/denominators.
        let zs = 0.25;
        let g = FnOperator::new(1, move |z, out| out[0] = z[0] - zs);
        let mut s = HalpernState::new(p(&[zs + 1.0]), 1.0).unwrap();
        // Independent rational recursion on (num, den).
        let (mut num, mut den): (i64, i64) = (1, 1);
        for k in 0..5i64 {
            step_exact(&mut s, &g).unwrap();
            // u_{k+1} = 1/(k+2)·u0 + (k+1)/(k+2)·u_k - (k+1)/(k+2)·u_k
            let (bn, bd) = (1, k + 2);
            let new_num = bn * den;
            let new_den = bd * den;
            let g = gcd(new_num, new_den);
            num = new_num / g;
            den = new_den / g;
            let expected = zs + num as f64 / den as f64;
            assert!((s.z()[0] - expected).abs() < 1e-15, "k={k}");
        }
        assert_eq!((num, den), (1, 6));
    }

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn divergence_guard_trips() {
        let g = FnOperator::new(1, |z, out| out[0] = -1e7 * z[0]);
        let mut s = HalpernState::new(p(&[1.0]), 1.0).unwrap();
        let mut tripped = false;
        for _ in 0..5 {
            if let Err(e) = step_exact(&mut s, &g) {
                assert!(matches!(e, Error::Diverged { .. }));
                tripped = true;
                break;
            }
        }
        assert!(tripped);
    }

    #[test]
    fn non_finite_is_fatal() {
        let g = FnOperator::new(1, |_, out| out[0] = f64::NAN);
        let mut s = HalpernState::new(p(&[1.0]), 1.0).unwrap();
        assert!(matches!(step_exact(&mut s, &g), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn override_rule_is_uncertified() {
        let s = HalpernState::new(p(&[1.0]), 1.0)
            .unwrap()
            .with_parameter_rule(ParameterRule::Override(Arc::new(|_| (0.1, 0.2))));
        assert!(!s.certified());
        assert_eq!(s.beta(), 0.1);
        assert_eq!(s.eta(), 0.2);
    }
}
