use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operator::AffineOperator;
use crate::point::Point;
use crate::wdro::SupervisedDataset;

/// `G(z) = A (z - z*)` with `A = Q diag(λ) Qᵀ`, eigenvalues spaced
/// geometrically from `1/cond` to `1`, so `|A| = L = 1`.
#[derive(Debug, Clone)]
pub struct SyntheticQuadratic {
    pub operator: AffineOperator,
    pub z_star: Point,
    pub l: f64,
    pub eigenvalues: Vec<f64>,
}

pub fn synth_quadratic(dim: usize, cond: f64, seed: u64) -> Result<SyntheticQuadratic> {
    if dim == 0 {
        return Err(Error::invalid("synth_quadratic needs dim >= 1"));
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err(Error::invalid(format!("cond must be >= 1, got {cond}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                1.0
            } else {
                cond.powf(-((dim - 1 - i) as f64) / (dim - 1) as f64)
            }
        })
        .collect();
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigenvalues.clone())) * q.transpose();
    // Exact symmetry.
    let a = (&a + a.transpose()) * 0.5;
    let z_star: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let shift = (&a * nalgebra::DVector::from_column_slice(&z_star))
        .iter()
        .copied()
        .collect();
    Ok(SyntheticQuadratic {
        operator: AffineOperator::new(a, shift)?,
        z_star: Point::new(z_star)?,
        l: 1.0,
        eigenvalues,
    })
}

/// Planted linear rule with Gaussian features. Each label is flipped with
/// probability `(1 - separability)/2`; `separability = 1` is noiseless and
/// `0` gives pure noise. `d` counts the features plus one.
pub fn synth_wdrsl(n: usize, d: usize, separability: f64, seed: u64) -> Result<SupervisedDataset> {
    Ok(synth_wdrsl_planted(n, d, separability, seed)?.0)
}

/// [`synth_wdrsl`] together with the planted unit direction.
pub fn synth_wdrsl_planted(
    n: usize,
    d: usize,
    separability: f64,
    seed: u64,
) -> Result<(SupervisedDataset, Vec<f64>)> {
    if n == 0 || d < 2 {
        return Err(Error::invalid("synth_wdrsl needs n >= 1 and d >= 2"));
    }
    if !(0.0..=1.0).contains(&separability) {
        return Err(Error::invalid(format!(
            "separability must lie in [0, 1], got {separability}"
        )));
    }
    let m = d - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let wn = crate::point::norm(&w);
    if wn == 0.0 {
        w[0] = 1.0;
    } else {
        w.iter_mut().for_each(|v| *v /= wn);
    }
    let flip = (1.0 - separability) / 2.0;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let phi: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let clean = if crate::point::dot(&phi, &w) >= 0.0 { 1.0 } else { -1.0 };
        let u: f64 = rng.random();
        labels.push(if u < flip { -clean } else { clean });
        features.push(phi);
    }
    Ok((SupervisedDataset::new(features, labels)?, w))
}
