use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::operator::{residual_inexact, FiniteSumInclusion, Operator};
use crate::point::Point;

/// Source of approximate residual values `z̃` with `|G(z) - z̃| <= gamma`.
pub trait InexactResidual {
    fn dim(&self) -> usize;

    fn residual(&mut self, z: &[f64], gamma: f64) -> Result<Point>;
}

/// Returns `G(z)` regardless of the requested accuracy.
pub struct ExactOracle<G> {
    g: G,
}

impl<G: Operator> ExactOracle<G> {
    pub fn new(g: G) -> Self {
        ExactOracle { g }
    }
}

impl<G: Operator> InexactResidual for ExactOracle<G> {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn residual(&mut self, z: &[f64], _gamma: f64) -> Result<Point> {
        self.g.apply(z)
    }
}

/// Forward-backward residual of a finite-sum inclusion, computed with the
/// resolvent at accuracy `α·gamma`.
pub struct ForwardBackwardOracle<'a> {
    prob: &'a FiniteSumInclusion,
}

impl<'a> ForwardBackwardOracle<'a> {
    pub fn new(prob: &'a FiniteSumInclusion) -> Self {
        ForwardBackwardOracle { prob }
    }
}

impl InexactResidual for ForwardBackwardOracle<'_> {
    fn dim(&self) -> usize {
        self.prob.dim()
    }

    fn residual(&mut self, z: &[f64], gamma: f64) -> Result<Point> {
        residual_inexact(self.prob, z, gamma)
    }
}

/// Direction of a synthetic error `e` with `|e| = gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Injection {
    /// `e = -gamma · G(z)/|G(z)|`
    Opposing,
    /// `e = gamma · G(z)/|G(z)|`
    Aligned,
    /// Uniform on the sphere of radius `gamma`.
    Random { seed: u64 },
}

/// Wraps an exact operator and returns `G(z) + e` with `|e|` exactly `gamma`.
/// Used to probe worst-case behaviour of the inexact bounds.
pub struct InjectedErrorOracle<G> {
    g: G,
    mode: Injection,
    rng: Option<ChaCha8Rng>,
    last_error: Option<Point>,
}

impl<G: Operator> InjectedErrorOracle<G> {
    pub fn new(g: G, mode: Injection) -> Self {
        let rng = match mode {
            Injection::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        InjectedErrorOracle {
            g,
            mode,
            rng,
            last_error: None,
        }
    }

    /// The error added on the most recent call.
    pub fn last_error(&self) -> Option<&Point> {
        self.last_error.as_ref()
    }

    fn direction(&mut self, gz: &[f64]) -> Vec<f64> {
        let n = crate::point::norm(gz);
        let fixed = |sign: f64| -> Vec<f64> {
            if n > 0.0 {
                gz.iter().map(|v| sign * v / n).collect()
            } else {
                let mut e = vec![0.0; gz.len()];
                e[0] = sign;
                e
            }
        };
        match self.mode {
            Injection::Opposing => fixed(-1.0),
            Injection::Aligned => fixed(1.0),
            Injection::Random { .. } => {
                let rng = self.rng.as_mut().expect("random mode has an rng");
                loop {
                    let v: Vec<f64> = (0..gz.len()).map(|_| rng.sample(StandardNormal)).collect();
                    let vn = crate::point::norm(&v);
                    if vn > 1e-300 {
                        return v.into_iter().map(|x| x / vn).collect();
                    }
                }
            }
        }
    }
}

impl<G: Operator> InexactResidual for InjectedErrorOracle<G> {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn residual(&mut self, z: &[f64], gamma: f64) -> Result<Point> {
        if !(gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
        }
        let gz = self.g.apply(z)?;
        let e: Vec<f64> = self.direction(&gz).into_iter().map(|d| gamma * d).collect();
        let out = gz.add(&e);
        self.last_error = Some(Point::from_vec_unchecked(e));
        Ok(out)
    }
}

/// Adapts a closure `(z, gamma) -> z̃`.
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: FnMut(&[f64], f64) -> Result<Point>,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOracle { dim, f }
    }
}

impl<F> InexactResidual for FnOracle<F>
where
    F: FnMut(&[f64], f64) -> Result<Point>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&mut self, z: &[f64], gamma: f64) -> Result<Point> {
        check_dim(self.dim, z.len())?;
        let out = (self.f)(z, gamma)?;
        check_dim(self.dim, out.dim())?;
        Ok(out)
    }
}
