use crate::error::{Error, Result};
use crate::point::{dot, norm};

use super::run::{IterationRecord, IterationTrace, PotentialKind};
use super::state::StepRecord;

/// Relative tolerance for the z-difference identities.
pub const ZDIFF_TOLERANCE: f64 = 1e-12;

/// Relative slack allowed on rate and potential bounds.
pub const RATE_SLACK: f64 = 1e-9;

/// `𝓛_k = k(k+1)/(2L) |g|² - (k+1) <g, z0 - z_k>`.
pub fn potential_value(k: usize, l: f64, z0: &[f64], zk: &[f64], g: &[f64]) -> f64 {
    let kf = k as f64;
    let inner: f64 = g
        .iter()
        .zip(z0.iter().zip(zk))
        .map(|(gi, (a, b))| gi * (a - b))
        .sum();
    kf * (kf + 1.0) / (2.0 * l) * dot(g, g) - (kf + 1.0) * inner
}

/// Residuals of the two z-difference identities for one step, relative to
/// the magnitude of the vectors involved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub k: usize,
    /// `z_{k+1} - z_k = β_k (z0 - z_k) - ((1-β_k)/L) z̃`
    pub first: f64,
    /// `z_{k+1} - z_k = (β_k/(1-β_k)) (z0 - z_{k+1}) - z̃/L`
    pub second: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.first.max(self.second)
    }

    pub fn passed(&self) -> bool {
        self.max_residual() <= ZDIFF_TOLERANCE
    }
}

pub fn zdiff_identity_check(z0: &[f64], rec: &StepRecord, l: f64) -> IdentityReport {
    let beta = rec.beta;
    let zk = &rec.z_before;
    let zn = &rec.z_after;
    let zt = &rec.ztilde;
    let scale = [norm(z0), norm(zk), norm(zn), norm(zt) / l]
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    let ratio = beta / (1.0 - beta);
    for i in 0..z0.len() {
        let lhs = zn[i] - zk[i];
        let rhs1 = beta * (z0[i] - zk[i]) - (1.0 - beta) / l * zt[i];
        let rhs2 = ratio * (z0[i] - zn[i]) - zt[i] / l;
        r1 += (lhs - rhs1).powi(2);
        r2 += (lhs - rhs2).powi(2);
    }
    IdentityReport {
        k: rec.k,
        first: r1.sqrt() / scale,
        second: r2.sqrt() / scale,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport {
    pub checked: usize,
    pub violations: usize,
    /// Iteration with the smallest relative margin.
    pub worst_k: Option<usize>,
    /// `min_k (rhs - lhs) / max(1, |rhs|)`.
    pub worst_margin: f64,
}

impl PotentialReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `𝓛_{k+1} <= 𝓛_k + |G_k|²/(12L) + 4(k+1)²/L · e_k²` along a trace
/// whose potentials were evaluated with the exact residual. `e_k` is the
/// logged oracle error `|G(z^k) - z̃^k|`, or `γ_k` when the error was not
/// logged.
pub fn potential_inequality_check(trace: &IterationTrace) -> Result<PotentialReport> {
    if trace.potential_kind != PotentialKind::Exact {
        return Err(Error::Unsupported(
            "potential inequality needs potentials evaluated at the exact residual".into(),
        ));
    }
    let l = trace.l;
    let mut rep = PotentialReport {
        checked: 0,
        violations: 0,
        worst_k: None,
        worst_margin: f64::INFINITY,
    };
    for w in trace.records.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let (Some(pk), Some(pn)) = (cur.potential, next.potential) else {
            continue;
        };
        let e = cur.err_norm.unwrap_or(cur.gamma_k);
        let kf = cur.k as f64;
        let rhs = pk + cur.res_norm.powi(2) / (12.0 * l) + 4.0 * (kf + 1.0).powi(2) / l * e * e;
        let scale = 1f64.max(rhs.abs()).max(pn.abs());
        let margin = (rhs - pn) / scale;
        rep.checked += 1;
        if margin < -RATE_SLACK {
            rep.violations += 1;
        }
        if margin < rep.worst_margin {
            rep.worst_margin = margin;
            rep.worst_k = Some(cur.k);
        }
    }
    Ok(rep)
}

/// Per-iteration quantities fed to [`rate_certificate`]. In stochastic mode
/// the squared norms are seed means.
#[derive(Debug, Clone, PartialEq)]
pub struct RateInput {
    /// `|G(z^k)|²` for `k = 0..=K`.
    pub res_sq: Vec<f64>,
    /// `|z^{k+1} - z^k|²` for `k = 0..K`.
    pub step_sq: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl RateInput {
    /// Uses logged values from a single trace.
    pub fn from_trace(trace: &IterationTrace) -> Self {
        Self::from_records(&trace.records)
    }

    pub fn from_records(records: &[IterationRecord]) -> Self {
        RateInput {
            res_sq: records.iter().map(|r| r.res_norm * r.res_norm).collect(),
            step_sq: records
                .iter()
                .filter_map(|r| r.step_norm.map(|s| s * s))
                .collect(),
            gamma: records.iter().map(|r| r.gamma_k).collect(),
            sigma: records.iter().map(|r| r.sigma_k).collect(),
        }
    }

    /// Seed means of the squared norms. All traces must have the same length.
    pub fn mean_of(traces: &[&IterationTrace]) -> Result<Self> {
        let first = traces
            .first()
            .ok_or_else(|| Error::invalid("no traces to average"))?;
        let len = first.records.len();
        if traces.iter().any(|t| t.records.len() != len) {
            return Err(Error::invalid("traces have different lengths"));
        }
        let m = traces.len() as f64;
        let mut out = RateInput::from_trace(first);
        out.res_sq.iter_mut().for_each(|v| *v = 0.0);
        out.step_sq.iter_mut().for_each(|v| *v = 0.0);
        for t in traces {
            let inp = RateInput::from_trace(t);
            for (o, v) in out.res_sq.iter_mut().zip(&inp.res_sq) {
                *o += v / m;
            }
            for (o, v) in out.step_sq.iter_mut().zip(&inp.step_sq) {
                *o += v / m;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub pass: bool,
    pub checked: usize,
    pub res_violations: usize,
    pub step_violations: usize,
    /// Iteration with the smallest relative margin.
    pub worst_k: usize,
    /// `min_k (bound - value)/bound` over both bounds.
    pub margin: f64,
}

/// `b_k = Σ_{i<k} (i+1)² (γ_i + σ_i)²` for `k = 0..=len`.
fn error_sums(gamma: &[f64], sigma: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(gamma.len() + 1);
    let mut acc = 0.0;
    b.push(0.0);
    for (i, (g, s)) in gamma.iter().zip(sigma).enumerate() {
        let t = (i as f64 + 1.0) * (g + s);
        acc += t * t;
        b.push(acc);
    }
    b
}

/// Checks, for every logged `k`,
///
/// ```text
/// |G(z^k)|² (k+1)(k+2)          <= (7 L D + 10 √b_k)²
/// |z^{k+1} - z^k|² (k+1)(k+2)   <= 8 (7 L D + 11 √b_{k+1})² / L²
/// ```
///
/// where `D >= |z^0 - z*|`.
pub fn rate_certificate(input: &RateInput, l: f64, d: f64) -> RateReport {
    let b = error_sums(&input.gamma, &input.sigma);
    let ld = 7.0 * l * d;
    let mut rep = RateReport {
        pass: true,
        checked: 0,
        res_violations: 0,
        step_violations: 0,
        worst_k: 0,
        margin: f64::INFINITY,
    };
    let consider = |k: usize, value: f64, bound: f64, step: bool, rep: &mut RateReport| {
        let margin = if bound > 0.0 {
            (bound - value) / bound
        } else if value == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        rep.checked += 1;
        if margin < -RATE_SLACK {
            if step {
                rep.step_violations += 1;
            } else {
                rep.res_violations += 1;
            }
            rep.pass = false;
        }
        if margin < rep.margin {
            rep.margin = margin;
            rep.worst_k = k;
        }
    };
    for (k, &r) in input.res_sq.iter().enumerate() {
        let kk = (k as f64 + 1.0) * (k as f64 + 2.0);
        let bound = (ld + 10.0 * b[k.min(b.len() - 1)].sqrt()).powi(2);
        consider(k, r * kk, bound, false, &mut rep);
    }
    for (k, &s) in input.step_sq.iter().enumerate() {
        let kk = (k as f64 + 1.0) * (k as f64 + 2.0);
        let bk1 = b[(k + 1).min(b.len() - 1)];
        let bound = 8.0 * (ld + 11.0 * bk1.sqrt()).powi(2) / (l * l);
        consider(k, s * kk, bound, true, &mut rep);
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Budget,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub stop: bool,
    pub reason: StopReason,
    pub k: usize,
}

/// Looks at the last logged row: stop once its residual is at most
/// `target_eps`, or once `k` reaches `budget`.
pub fn stopping_rule(
    records: &[IterationRecord],
    target_eps: Option<f64>,
    budget: usize,
) -> StopDecision {
    let Some(last) = records.last() else {
        return StopDecision {
            stop: budget == 0,
            reason: if budget == 0 {
                StopReason::Budget
            } else {
                StopReason::Continue
            },
            k: 0,
        };
    };
    let (stop, reason) = match target_eps {
        Some(eps) if last.res_norm <= eps => (true, StopReason::Converged),
        _ if last.k >= budget => (true, StopReason::Budget),
        _ => (false, StopReason::Continue),
    };
    StopDecision {
        stop,
        reason,
        k: last.k,
    }
}
