//! Dense vectors in the ambient space.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// A point of the ambient space `Z`.
///
/// All solver iterates, anchors and residual values are `Point`s. The type
/// derefs to `[f64]` so slice-based kernels accept it directly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    /// Wraps `coords`, rejecting NaN and infinite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "point coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Point(coords))
    }

    /// Wraps `coords` without the finiteness check.
    pub fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn sub(&self, other: &[f64]) -> Point {
        Point(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &[f64]) -> Point {
        Point(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| s * a).collect())
    }

    /// `self += s * x`
    pub fn axpy(&mut self, s: f64, x: &[f64]) {
        axpy(s, x, &mut self.0);
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}
