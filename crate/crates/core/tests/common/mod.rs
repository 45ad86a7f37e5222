#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use halpern_core::operator::ComponentOperators;
use halpern_core::projections::ConvexSet;
use halpern_core::Point;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A constraint `u(x) > 0` for the log barrier, returning `u`, `∇u`, `∇²u`.
pub type Barrier = Box<dyn Fn(&[f64]) -> (f64, DVector<f64>, DMatrix<f64>)>;

pub fn lower_bound(i: usize, dim: usize, lo: f64) -> Barrier {
    Box::new(move |x| {
        let mut g = DVector::zeros(dim);
        g[i] = 1.0;
        (x[i] - lo, g, DMatrix::zeros(dim, dim))
    })
}

pub fn upper_bound(i: usize, dim: usize, hi: f64) -> Barrier {
    Box::new(move |x| {
        let mut g = DVector::zeros(dim);
        g[i] = -1.0;
        (hi - x[i], g, DMatrix::zeros(dim, dim))
    })
}

pub fn box_barriers(lo: &[f64], hi: &[f64]) -> Vec<Barrier> {
    let dim = lo.len();
    let mut out = Vec::new();
    for i in 0..dim {
        out.push(lower_bound(i, dim, lo[i]));
        out.push(upper_bound(i, dim, hi[i]));
    }
    out
}

/// `r² - |x_S - c|² > 0` on the coordinates `S = 0..c.len()`.
pub fn ball_barrier(center: Vec<f64>, radius: f64, dim: usize) -> Barrier {
    Box::new(move |x| {
        let m = center.len();
        let mut u = radius * radius;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..m {
            let d = x[i] - center[i];
            u -= d * d;
            g[i] = -2.0 * d;
            h[(i, i)] = -2.0;
        }
        (u, g, h)
    })
}

/// `λ - |w|²/(s²λ) > 0`, i.e. `|w| < sλ`, together with `λ > 0`, `λ` the last coordinate. The
/// first function is concave on `λ > 0`, so its barrier Hessian stays
/// positive definite near the boundary.
pub fn cone_barriers(dim: usize, s: f64) -> Vec<Barrier> {
    let soc: Barrier = Box::new(move |x| {
        let m = dim - 1;
        let lam = x[m];
        let s2 = 1.0 / (s * s);
        let wsq: f64 = x[..m].iter().map(|v| v * v).sum();
        let u = lam - s2 * wsq / lam;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..m {
            g[i] = -2.0 * s2 * x[i] / lam;
            h[(i, i)] = -2.0 * s2 / lam;
            h[(i, m)] = 2.0 * s2 * x[i] / (lam * lam);
            h[(m, i)] = h[(i, m)];
        }
        g[m] = 1.0 + s2 * wsq / (lam * lam);
        h[(m, m)] = -2.0 * s2 * wsq / (lam * lam * lam);
        (u, g, h)
    });
    vec![soc, lower_bound(dim - 1, dim, 0.0)]
}

fn feasible(cons: &[Barrier], x: &[f64]) -> bool {
    cons.iter().all(|c| c(x).0 > 0.0)
}

/// Projection of `y` onto `{x : u_j(x) >= 0}` by a primal log-barrier path
/// with damped Newton steps. `start` must be strictly feasible.
pub fn barrier_projection(cons: &[Barrier], y: &[f64], start: &[f64]) -> Vec<f64> {
    let dim = y.len();
    assert!(feasible(cons, start), "barrier start is not strictly feasible");
    let mut x = start.to_vec();
    let m = cons.len() as f64;
    let mut t = 1.0;
    let obj = |x: &[f64], t: f64| -> f64 {
        let q: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
        t * q - cons.iter().map(|c| c(x).0.ln()).sum::<f64>()
    };
    // |x_t - P(y)|² <= 2m/t for this 1-strongly convex objective.
    while m / t > 1e-14 {
        for _ in 0..200 {
            let mut g = DVector::from_fn(dim, |i, _| t * (x[i] - y[i]));
            let mut h = DMatrix::identity(dim, dim) * t;
            for c in cons {
                let (u, gu, hu) = c(&x);
                g -= &gu / u;
                h += &gu * gu.transpose() / (u * u) - hu / u;
            }
            // Roundoff near the boundary can defeat Cholesky; LU still works.
            let dx = match h.clone().cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => h.lu().solve(&(-&g)).expect("singular barrier Hessian"),
            };
            let dec = -g.dot(&dx);
            if dec / 2.0 < 1e-14 {
                break;
            }
            let f0 = obj(&x, t);
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = (0..dim).map(|i| x[i] + step * dx[i]).collect();
                if feasible(cons, &trial) && obj(&trial, t) <= f0 - 0.25 * step * dec {
                    x = trial;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    break;
                }
            }
            if step < 1e-20 {
                break;
            }
        }
        t *= 8.0;
    }
    x
}

/// Projected extragradient for `0 ∈ F(z) + N_C(z)` with `F` the mean of the
/// components.
pub fn extragradient(
    comps: &dyn ComponentOperators,
    set: &dyn ConvexSet,
    z0: &[f64],
    step: f64,
    iters: usize,
) -> Point {
    let dim = z0.len();
    let mut z = z0.to_vec();
    let mut f = vec![0.0; dim];
    for _ in 0..iters {
        comps.mean_into(&z, &mut f);
        let half: Vec<f64> = (0..dim).map(|i| z[i] - step * f[i]).collect();
        let zb = set.project(&half).unwrap();
        comps.mean_into(&zb, &mut f);
        let full: Vec<f64> = (0..dim).map(|i| z[i] - step * f[i]).collect();
        z = set.project(&full).unwrap().into_vec();
    }
    Point::new(z).unwrap()
}
