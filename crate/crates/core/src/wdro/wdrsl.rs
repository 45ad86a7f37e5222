use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::operator::{ComponentOperators, FiniteSumInclusion};
use crate::point::{dot, norm, Point};
use crate::projections::{
    ConvexSet, IcecreamCone, Intersection, Lifted, LinfBall, Product, ProjectionResolvent,
};

use super::glm::{Glm, Regularizer};

/// Binary classification data `{(φ_i, ψ_i)}` with `ψ_i ∈ {-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    feature_dim: usize,
}

impl SupervisedDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("dataset has no rows"));
        }
        if features.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let feature_dim = features[0].len();
        let mut flat = Vec::with_capacity(feature_dim * features.len());
        for (i, row) in features.iter().enumerate() {
            if row.len() != feature_dim {
                return Err(Error::invalid(format!(
                    "row {i} has {} features, expected {feature_dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a non-finite feature")));
            }
            flat.extend_from_slice(row);
        }
        if let Some(i) = labels.iter().position(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::invalid(format!(
                "label {} at row {i} is not -1 or +1",
                labels[i]
            )));
        }
        Ok(SupervisedDataset {
            features: flat,
            labels,
            feature_dim,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// `d - 1`
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        (0..self.n()).map(move |i| (self.feature(i), self.label(i)))
    }

    pub fn max_feature_norm(&self) -> f64 {
        (0..self.n())
            .map(|i| norm(self.feature(i)))
            .fold(0.0, f64::max)
    }
}

/// Model and ambiguity-set parameters of the distributionally robust GLM.
#[derive(Clone)]
pub struct GlmSpec {
    pub psi: Glm,
    pub psi0: Regularizer,
    /// Wasserstein radius `θ`.
    pub theta: f64,
    /// Label-flip cost `κ`.
    pub kappa: f64,
    /// Feasible set `Γ` for `w`; `None` is the whole space.
    pub gamma: Option<Arc<dyn ConvexSet>>,
}

impl std::fmt::Debug for GlmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlmSpec")
            .field("psi", &self.psi)
            .field("psi0", &self.psi0)
            .field("theta", &self.theta)
            .field("kappa", &self.kappa)
            .field("gamma", &self.gamma.as_ref().map(|_| "custom"))
            .finish()
    }
}

impl GlmSpec {
    pub fn new(psi: Glm, theta: f64, kappa: f64) -> Self {
        GlmSpec {
            psi,
            psi0: Regularizer::Zero,
            theta,
            kappa,
            gamma: None,
        }
    }

    pub fn with_regularizer(mut self, psi0: Regularizer) -> Self {
        self.psi0 = psi0;
        self
    }

    pub fn with_gamma(mut self, gamma: Arc<dyn ConvexSet>) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.psi.validate()?;
        self.psi0.validate()?;
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    /// `L̃0`, the Lipschitz constant of `Ψ`; sets the cone slope.
    pub fn ltilde0(&self) -> f64 {
        self.psi.lipschitz()
    }

    /// Modulus fed to [`wdrsl_smoothness_constant`]: the largest of `L̃0` and
    /// the gradient Lipschitz constants of `Ψ` and `Ψ0`.
    pub fn smoothness_modulus(&self) -> f64 {
        self.psi
            .lipschitz()
            .max(self.psi.smoothness())
            .max(self.psi0.smoothness())
    }
}

/// Coordinates of `z = (w, λ, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WdrslLayout {
    /// `d - 1`
    pub m: usize,
    pub n: usize,
}

impl WdrslLayout {
    pub fn dim(&self) -> usize {
        self.m + 1 + self.n
    }

    /// `d`
    pub fn x_dim(&self) -> usize {
        self.m + 1
    }

    pub fn lambda(&self) -> usize {
        self.m
    }

    pub fn y(&self, i: usize) -> usize {
        self.m + 1 + i
    }

    pub fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], f64, &'a [f64]) {
        (&z[..self.m], z[self.m], &z[self.m + 1..])
    }
}

fn layout_for(data: &SupervisedDataset) -> WdrslLayout {
    WdrslLayout {
        m: data.feature_dim(),
        n: data.n(),
    }
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        Err(Error::IndexOutOfRange { index: i, count: n })
    } else {
        Ok(())
    }
}

/// `f_i(x, y) = Ψ0(w) + λ(θ - κ) + Ψ(<φ_i, w>) + y_i (ψ_i <φ_i, w> - λκ)`.
pub fn wdrsl_fi_value(z: &[f64], i: usize, data: &SupervisedDataset, spec: &GlmSpec) -> Result<f64> {
    let lay = layout_for(data);
    check_dim(lay.dim(), z.len())?;
    check_index(i, lay.n)?;
    let (w, lam, y) = lay.split(z);
    let t = dot(data.feature(i), w);
    Ok(spec.psi0.value(w)
        + lam * (spec.theta - spec.kappa)
        + spec.psi.value(t)
        + y[i] * (data.label(i) * t - lam * spec.kappa))
}

/// `(∇_x f_i, ∇_y f_i)`; the second vector has length `N` with a single
/// nonzero entry at `i`.
pub fn wdrsl_grad_fi(
    z: &[f64],
    i: usize,
    data: &SupervisedDataset,
    spec: &GlmSpec,
) -> Result<(Point, Point)> {
    let lay = layout_for(data);
    check_dim(lay.dim(), z.len())?;
    check_index(i, lay.n)?;
    let (w, lam, y) = lay.split(z);
    let phi = data.feature(i);
    let psi = data.label(i);
    let t = dot(phi, w);
    let mut gx = Point::zeros(lay.x_dim());
    spec.psi0.add_gradient(w, 1.0, &mut gx[..lay.m]);
    crate::point::axpy(spec.psi.derivative(t) + y[i] * psi, phi, &mut gx[..lay.m]);
    gx[lay.m] = spec.theta - spec.kappa - y[i] * spec.kappa;
    let mut gy = Point::zeros(lay.n);
    gy[i] = psi * t - lam * spec.kappa;
    Ok((gx, gy))
}

/// `F_i(z) = (∇_x f_i; -∇_y f_i)`.
pub fn wdrsl_saddle_component(
    z: &[f64],
    i: usize,
    data: &SupervisedDataset,
    spec: &GlmSpec,
) -> Result<Point> {
    let (gx, gy) = wdrsl_grad_fi(z, i, data, spec)?;
    let mut out = gx.into_vec();
    out.extend(gy.iter().map(|v| -v));
    Ok(Point::from_vec_unchecked(out))
}

/// `L0 = sqrt(max{3L² + 3L²M⁴ + 2M², 2κ², 3M² + κ²})` with `M = max_i |φ_i|`
/// and `L = ltilde0`.
pub fn wdrsl_smoothness_constant(data: &SupervisedDataset, ltilde0: f64, kappa: f64) -> f64 {
    let m = data.max_feature_norm();
    let l2 = ltilde0 * ltilde0;
    let m2 = m * m;
    let a = 3.0 * l2 + 3.0 * l2 * m2 * m2 + 2.0 * m2;
    let b = 2.0 * kappa * kappa;
    let c = 3.0 * m2 + kappa * kappa;
    a.max(b).max(c).sqrt()
}

/// The saddle components `F_1, ..., F_N` as a sparse family.
pub struct WdrslComponents {
    data: Arc<SupervisedDataset>,
    psi: Glm,
    psi0: Regularizer,
    theta: f64,
    kappa: f64,
    layout: WdrslLayout,
}

impl WdrslComponents {
    pub fn new(data: Arc<SupervisedDataset>, spec: &GlmSpec) -> Result<Self> {
        spec.validate()?;
        let layout = layout_for(&data);
        Ok(WdrslComponents {
            data,
            psi: spec.psi,
            psi0: spec.psi0,
            theta: spec.theta,
            kappa: spec.kappa,
            layout,
        })
    }

    pub fn layout(&self) -> WdrslLayout {
        self.layout
    }
}

impl ComponentOperators for WdrslComponents {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn count(&self) -> usize {
        self.layout.n
    }

    fn accumulate(&self, i: usize, z: &[f64], scale: f64, out: &mut [f64]) {
        let m = self.layout.m;
        let w = &z[..m];
        let lam = z[m];
        let yi = z[self.layout.y(i)];
        let phi = self.data.feature(i);
        let psi = self.data.label(i);
        let t = dot(phi, w);
        self.psi0.add_gradient(w, scale, &mut out[..m]);
        crate::point::axpy(scale * (self.psi.derivative(t) + yi * psi), phi, &mut out[..m]);
        out[m] += scale * (self.theta - self.kappa - self.kappa * yi);
        out[self.layout.y(i)] -= scale * (psi * t - lam * self.kappa);
    }
}

/// A built distributionally robust GLM instance.
pub struct WdrslProblem {
    pub inclusion: FiniteSumInclusion,
    pub layout: WdrslLayout,
    pub l0: f64,
    pub ltilde0: f64,
    /// Whether the projection onto `𝒳` is exact (otherwise Dykstra).
    pub x_projection_exact: bool,
}

impl WdrslProblem {
    /// `(w0, λ0, y0)` with `λ0 = (L̃0 + 1)|w0| + 1`, strictly inside the cone.
    pub fn initial_point(&self, w0: &[f64], y0: &[f64]) -> Result<Point> {
        check_dim(self.layout.m, w0.len())?;
        check_dim(self.layout.n, y0.len())?;
        let mut z = Vec::with_capacity(self.layout.dim());
        z.extend_from_slice(w0);
        z.push((self.ltilde0 + 1.0) * norm(w0) + 1.0);
        z.extend(y0.iter().map(|v| v.clamp(-1.0, 1.0)));
        Point::new(z)
    }

    /// Initial point with `w0 = 0`, `y0 = 0`.
    pub fn default_initial_point(&self) -> Point {
        self.initial_point(&vec![0.0; self.layout.m], &vec![0.0; self.layout.n])
            .expect("dimensions match by construction")
    }
}

/// Assembles the inclusion `0 ∈ F(z) + N_{𝒳 x 𝒴}(z)` with `F` the mean of
/// the saddle components, `𝒳` the icecream cone (intersected with `Γ x R`
/// when `Γ` is given) and `𝒴` the unit `ℓ∞` ball.
pub fn build_wdrsl_problem(
    data: Arc<SupervisedDataset>,
    spec: &GlmSpec,
    alpha: f64,
) -> Result<WdrslProblem> {
    spec.validate()?;
    let layout = layout_for(&data);
    if layout.m == 0 {
        return Err(Error::invalid("dataset needs at least one feature column"));
    }
    let ltilde0 = spec.ltilde0();
    let l0 = wdrsl_smoothness_constant(&data, spec.smoothness_modulus(), spec.kappa);
    let cone: Arc<dyn ConvexSet> = Arc::new(IcecreamCone::new(layout.x_dim(), ltilde0)?);
    let (xset, exact): (Arc<dyn ConvexSet>, bool) = match &spec.gamma {
        None => (cone, true),
        Some(g) => {
            check_dim(layout.m, g.dim())?;
            let lifted: Arc<dyn ConvexSet> = Arc::new(Lifted::new(g.clone(), 1));
            (Arc::new(Intersection::new(vec![cone, lifted])?), false)
        }
    };
    let yset: Arc<dyn ConvexSet> = Arc::new(LinfBall::unit(layout.n));
    let set = Arc::new(Product::new(vec![xset, yset])?);
    let components = Arc::new(WdrslComponents::new(data, spec)?);
    let inclusion = FiniteSumInclusion::new(
        Arc::new(ProjectionResolvent::new(set)),
        components,
        l0,
        alpha,
    )?;
    if let Glm::Quadratic { range } = spec.psi {
        log::info!("quadratic link: Lipschitz constant {range} holds on |t| <= {range} only");
    }
    Ok(WdrslProblem {
        inclusion,
        layout,
        l0,
        ltilde0,
        x_projection_exact: exact,
    })
}
