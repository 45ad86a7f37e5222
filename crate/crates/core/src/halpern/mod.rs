//! Halpern iterations for `0 = G(z)` with `G` `1/L`-co-coercive:
//!
//! ```text
//! z^{k+1} = β_k z^0 + (1 - β_k) z^k - η_k z̃^k,   β_k = 1/(k+2),  η_k = (1 - β_k)/L
//! ```
//!
//! where `z̃^k` is `G(z^k)` (exact), an approximation within `γ_k`
//! (inexact), or the forward-backward residual built from a PAGE estimate
//! (stochastic).

mod diagnostics;
mod oracle;
mod run;
mod schedule;
mod state;

pub use diagnostics::{
    potential_inequality_check, potential_value, rate_certificate, stopping_rule,
    zdiff_identity_check, IdentityReport, PotentialReport, RateInput, RateReport, StopDecision,
    StopReason, RATE_SLACK, ZDIFF_TOLERANCE,
};
pub use oracle::{ExactOracle, FnOracle, ForwardBackwardOracle, InexactResidual, Injection, InjectedErrorOracle};
pub use run::{
    run_exact, run_inexact, run_stochastic, IterationRecord, IterationTrace, NullSink,
    PotentialKind, RunOptions, TraceSink,
};
pub use schedule::ToleranceSchedule;
pub use state::{
    step_exact, step_inexact, step_stochastic, HalpernState, ParameterRule, StepRecord,
    DIVERGENCE_FACTOR,
};
