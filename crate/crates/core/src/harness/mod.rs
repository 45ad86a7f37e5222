//! Experiment plumbing: configuration, datasets, synthetic instances,
//! parallel runs over seeds, trace files, rate fits and sample-complexity
//! tables.

mod checks;
mod complexity;
mod config;
mod dataset;
mod fit;
mod runner;
mod synth;
mod trace;

pub use checks::{quadratic_components, run_checks, CheckOptions, CheckResult};
pub use complexity::{
    complexity_from_aggregates, complexity_row, sample_complexity_report, ComplexityReport,
    ComplexityRow, EXPONENT_BAND, MIN_EPS_VALUES, MIN_SEEDS, PREDICTED_EXPONENT,
};
pub use config::{
    EstimatorKind, ExperimentConfig, InjectionKind, OutputConfig, PageSection, ProblemConfig,
    ProblemKind, SolverConfig, SolverKind,
};
pub use dataset::{ingest_csv, read_csv, read_matrix_csv, write_csv};
pub use fit::{fit_rate, fit_rate_points, least_squares, FitOutcome, RateFit, MIN_FIT_ROWS, RATE_PASS_SLOPE};
pub use runner::{
    aggregate_path, build_instance, estimator_mode, run_experiment, run_instance, trace_path,
    ExperimentOutcome, Instance, InstanceKind, SeedRun,
};
pub use synth::{synth_quadratic, synth_wdrsl, synth_wdrsl_planted, SyntheticQuadratic};
pub use trace::{
    aggregate, parse_trace, read_aggregate, read_trace, write_aggregate, write_trace,
    AggregateRow, TraceConstants, TraceFile, TraceHeader, TraceRow, TraceWriter,
    AGGREGATE_COLUMNS, TRACE_COLUMNS, TRACE_MAGIC,
};
