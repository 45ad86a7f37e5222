//! Wasserstein distributionally robust problems as finite-sum inclusions.
//!
//! Two families are covered: robust generalized linear models for binary
//! classification ([`build_wdrsl_problem`]) and robust problems with a
//! smooth convex-concave loss ([`build_wdro_cc_problem`]).

mod cc;
mod glm;
mod wdrsl;

pub use cc::{
    build_wdro_cc_problem, empirical_smoothness, growth_condition_note, BilinearLoss, CcComponents,
    CcLossSpec, CcProblem, GrowthNote, Metric, QuadraticSaddleLoss, SaddleLoss, Support,
};
pub use glm::{Glm, Regularizer};
pub use wdrsl::{
    build_wdrsl_problem, wdrsl_fi_value, wdrsl_grad_fi, wdrsl_saddle_component,
    wdrsl_smoothness_constant, GlmSpec, SupervisedDataset, WdrslComponents, WdrslLayout,
    WdrslProblem,
};
