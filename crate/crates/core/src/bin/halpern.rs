use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use halpern_core::halpern::{potential_inequality_check, rate_certificate, PotentialKind, RateInput};
use halpern_core::harness::{
    fit_rate, read_trace, run_checks, run_experiment, sample_complexity_report, CheckOptions,
    ExperimentConfig, FitOutcome, SolverKind, EXPONENT_BAND,
};
use halpern_core::{Error, ErrorKind};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CERTIFICATE: u8 = 4;

#[derive(Parser)]
#[command(name = "halpern", version, about = "Halpern iterations for co-coercive inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration budget (overrides solver.budget).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one trace per seed plus an aggregate.
    Run(Common),
    /// Fit log residual against log k on a trace file.
    FitRate {
        trace: PathBuf,
        #[arg(long, default_value_t = 10)]
        k_min: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Samples needed to reach mean squared residual eps² under schedule A.
    SampleComplexity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated eps grid.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025])]
        eps: Vec<f64>,
    },
    /// Run the invariant suite.
    Check(Common),
}

enum Failure {
    Error(Error),
    Certificate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.solver.seeds = vec![s];
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    if let Some(b) = common.budget {
        cfg.solver.budget = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let out = run_experiment(&cfg)?;
    let mut failures = Vec::new();
    for r in &out.runs {
        let last = r.trace.last();
        if !common.quiet {
            println!(
                "seed {}: k={} |G|={:.6e} samples={} -> {}",
                r.seed,
                last.k,
                last.res_norm,
                last.cum_samples,
                r.path.display()
            );
        }
        if cfg.solver.kind != SolverKind::Stochastic {
            if let (Some(d), true) = (r.distance, r.trace.certified) {
                let cert = rate_certificate(&RateInput::from_trace(&r.trace), r.trace.l, d);
                if !cert.pass {
                    failures.push(format!(
                        "seed {}: rate bound violated ({} residual, {} step) worst at k={}",
                        r.seed, cert.res_violations, cert.step_violations, cert.worst_k
                    ));
                }
            }
            if r.trace.potential_kind == PotentialKind::Exact {
                let p = potential_inequality_check(&r.trace)?;
                if !p.passed() {
                    failures.push(format!(
                        "seed {}: potential inequality violated {} times",
                        r.seed, p.violations
                    ));
                }
            }
        }
    }
    if !common.quiet {
        println!("aggregate -> {}", out.aggregate_path.display());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Certificate(failures.join("\n")))
    }
}

fn cmd_fit(trace: &PathBuf, k_min: usize, quiet: bool) -> Result<(), Failure> {
    let t = read_trace(trace)?;
    match fit_rate(&t, k_min)? {
        FitOutcome::ConvergedExactly => {
            if !quiet {
                println!("converged exactly (all residuals zero for k >= {k_min})");
            }
            Ok(())
        }
        FitOutcome::Fitted(f) => {
            if !quiet {
                println!(
                    "slope={:.4} intercept={:.4} r2={:.4} rows={} {}",
                    f.slope,
                    f.intercept,
                    f.r2,
                    f.rows,
                    if f.pass { "PASS" } else { "FAIL" }
                );
            }
            if f.pass {
                Ok(())
            } else {
                Err(Failure::Certificate(format!(
                    "slope {:.4} is above -0.9",
                    f.slope
                )))
            }
        }
    }
}

fn cmd_complexity(common: &Common, eps: &[f64]) -> Result<(), Failure> {
    let cfg = load(common)?;
    let rep = sample_complexity_report(&cfg, eps)?;
    if !common.quiet {
        println!("eps,k,samples,censored");
        for r in &rep.rows {
            println!(
                "{},{},{},{}",
                r.eps,
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.samples.map(|s| format!("{s:.1}")).unwrap_or_default(),
                r.censored
            );
        }
        match rep.slope {
            Some(s) => println!("slope={s:.3} predicted={}", rep.predicted),
            None => println!("slope unavailable (fewer than two uncensored rows)"),
        }
    }
    if !rep.within_band {
        log::warn!(
            "sample-complexity slope {:?} outside [{}, {}]",
            rep.slope,
            EXPONENT_BAND.0,
            EXPONENT_BAND.1
        );
    }
    Ok(())
}

fn cmd_check(common: &Common) -> Result<(), Failure> {
    let mut opts = CheckOptions::default();
    if let Some(s) = common.seed {
        opts.seed = s;
    }
    if let Some(b) = common.budget {
        opts.budget = b;
    }
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out/check"));
    let mut results = run_checks(&opts, &dir)?;
    if common.config.is_some() {
        // The configured experiment must also satisfy its certificates.
        let ok = match cmd_run(&Common {
            out: Some(common.out.clone().unwrap_or(dir.clone()).join("run")),
            ..common.clone()
        }) {
            Ok(()) => true,
            Err(Failure::Certificate(_)) => false,
            Err(e) => return Err(e),
        };
        results.push(halpern_core::harness::CheckResult {
            name: "configured-run",
            passed: ok,
            detail: "rate and potential certificates".into(),
        });
    }
    let mut failed = Vec::new();
    for r in &results {
        if !common.quiet {
            println!("{:<24} {} {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        }
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Certificate(format!("failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let quiet = match &cli.command {
        Command::Run(c) | Command::Check(c) => c.quiet,
        Command::SampleComplexity { common, .. } => common.quiet,
        Command::FitRate { quiet, .. } => *quiet,
    };
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }),
    )
    .init();
    let res = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::FitRate { trace, k_min, quiet } => cmd_fit(trace, *k_min, *quiet),
        Command::SampleComplexity { common, eps } => cmd_complexity(common, eps),
        Command::Check(c) => cmd_check(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Certificate(msg)) => {
            eprintln!("certificate failure: {msg}");
            ExitCode::from(EXIT_CERTIFICATE)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Solver => EXIT_SOLVER,
            })
        }
    }
}
