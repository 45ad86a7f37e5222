use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halpern::ToleranceSchedule;
use crate::page::DEFAULT_CAP_MULTIPLE;
use crate::wdro::{Glm, Regularizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Affine `G(z) = A z - b` read from CSV files; `L` is supplied.
    RawCocoercive,
    Wdrsl,
    WdroCc,
    SyntheticQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Exact,
    Inexact,
    Stochastic,
}

/// Synthetic error injected by the inexact driver on top of the exact
/// residual. `None` uses the problem's own inexact resolvent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionKind {
    #[default]
    None,
    Opposing,
    Aligned,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[default]
    Page,
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Instance seed. When absent, each run seed also drives the instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Resolvent step `α`; defaults to `1/L0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    // synthetic-quadratic, wdro-cc
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_cond")]
    pub cond: f64,

    // wdrsl, wdro-cc
    #[serde(default = "default_n")]
    pub n: usize,
    /// `d`: number of features plus one.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_separability")]
    pub separability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_link")]
    pub link: Glm,
    #[serde(default)]
    pub regularizer: Regularizer,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,

    // wdro-cc
    #[serde(default = "default_x_radius")]
    pub x_radius: f64,

    // raw-cocoercive
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_eps: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub injection: InjectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageSection {
    #[serde(default)]
    pub estimator: EstimatorKind,
    /// Defaults follow the tolerance schedule: schedule A gives `a = 1/2`
    /// and its `eps`, schedule B gives `eps = 1` and its `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Per-component variance bound; estimated from a pilot pass if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_pilot")]
    pub pilot_samples: usize,
    /// Batch cap as a multiple of `N`; 0 disables the cap.
    #[serde(default = "default_cap")]
    pub cap_multiple: f64,
    #[serde(default = "default_true")]
    pub full_batch_override: bool,
}

impl Default for PageSection {
    fn default() -> Self {
        PageSection {
            estimator: EstimatorKind::Page,
            eps: None,
            a: None,
            sigma: None,
            pilot_samples: default_pilot(),
            cap_multiple: default_cap(),
            full_batch_override: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    #[serde(default = "default_schedule")]
    pub schedule: ToleranceSchedule,
    #[serde(default)]
    pub page: PageSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_dim() -> usize {
    20
}
fn default_cond() -> f64 {
    100.0
}
fn default_n() -> usize {
    200
}
fn default_d() -> usize {
    5
}
fn default_separability() -> f64 {
    0.9
}
fn default_link() -> Glm {
    Glm::Logistic
}
fn default_theta() -> f64 {
    0.1
}
fn default_kappa() -> f64 {
    1.0
}
fn default_x_radius() -> f64 {
    1.0
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_schedule() -> ToleranceSchedule {
    ToleranceSchedule::Zero
}
fn default_pilot() -> usize {
    64
}
fn default_cap() -> f64 {
    DEFAULT_CAP_MULTIPLE
}
fn default_true() -> bool {
    true
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Every field, defaults included, as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.solver.budget < 1 {
            return bad("solver.budget must be >= 1".into());
        }
        if self.solver.seeds.is_empty() {
            return bad("solver.seeds must not be empty".into());
        }
        let mut seeds = self.solver.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.solver.seeds.len() {
            return bad("solver.seeds must be distinct".into());
        }
        self.schedule
            .validate()
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        if let Some(e) = self.solver.target_eps {
            if !(e > 0.0) {
                return bad(format!("solver.target_eps must be positive, got {e}"));
            }
        }
        let p = &self.problem;
        if let Some(a) = p.alpha {
            if !(a > 0.0) {
                return bad(format!("problem.alpha must be positive, got {a}"));
            }
        }
        match p.kind {
            ProblemKind::SyntheticQuadratic => {
                if p.dim < 1 || !(p.cond >= 1.0) {
                    return bad("synthetic-quadratic needs dim >= 1 and cond >= 1".into());
                }
            }
            ProblemKind::Wdrsl => {
                if p.dataset.is_none() && (p.n < 1 || p.d < 2) {
                    return bad("wdrsl needs n >= 1 and d >= 2".into());
                }
                if !(0.0..=1.0).contains(&p.separability) {
                    return bad("problem.separability must lie in [0, 1]".into());
                }
                p.link.validate().map_err(|e| Error::Config(e.to_string()))?;
                p.regularizer
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            ProblemKind::WdroCc => {
                if p.n < 1 || p.dim < 1 {
                    return bad("wdro-cc needs n >= 1 and dim >= 1".into());
                }
            }
            ProblemKind::RawCocoercive => {
                if p.matrix.is_none() {
                    return bad("raw-cocoercive needs problem.matrix".into());
                }
                match p.l {
                    Some(l) if l > 0.0 => {}
                    _ => return bad("raw-cocoercive needs a positive problem.l".into()),
                }
            }
        }
        if self.solver.kind == SolverKind::Stochastic
            && matches!(p.kind, ProblemKind::RawCocoercive | ProblemKind::SyntheticQuadratic)
        {
            return bad("the stochastic solver needs a finite-sum problem (wdrsl or wdro-cc)".into());
        }
        if self.solver.injection != InjectionKind::None && self.solver.kind != SolverKind::Inexact {
            return bad("solver.injection applies to the inexact solver only".into());
        }
        if !(self.page.cap_multiple >= 0.0) {
            return bad("page.cap_multiple must be >= 0".into());
        }
        Ok(())
    }

    /// PAGE `(eps, a)`, aligned with the tolerance schedule unless set.
    pub fn page_parameters(&self) -> (f64, f64) {
        let (eps, a) = match self.schedule {
            ToleranceSchedule::Sqrt { eps } => (eps, 0.5),
            ToleranceSchedule::Power { a } => (1.0, a),
            ToleranceSchedule::Zero => (1.0, 2.0),
        };
        (self.page.eps.unwrap_or(eps), self.page.a.unwrap_or(a))
    }
}
