//! `advice-rl`: run teacher-student experiments, compare groups, solve finite
//! domains exactly and check linear function-approximation assumptions.

mod artifacts;
mod compare;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use advice_core::env::{LinearChain, SingleState, TabularDomain, TwoState};
use advice_core::harness::{DomainKind, Experiment, HarnessError};
use advice_core::oracle::value_iteration;
use advice_core::{AdviceStrategy, TeacherQuality};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::artifacts::{artifact_path, digest_line, RunManifest};
use crate::config::{digest_of, digests, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Degenerate(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if let Some(c) = e.config_error() {
            CliError::Config(c.to_string())
        } else if e.is_divergence() {
            CliError::Divergence(format!("learner diverged: {e}"))
        } else {
            CliError::Other(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "advice-rl",
    version,
    about = "Budgeted teacher-student action advice experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment group and write its curve, eval, results and manifest files.
    Run(RunArgs),
    /// Compare group results files with one-way ANOVA on total reward.
    Compare(CompareArgs),
    /// Solve a finite domain by value iteration and write Q* as CSV.
    Oracle(OracleArgs),
    /// Estimate the feature covariances and report the positive-definiteness verdicts.
    CheckAssumptions(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "ADVICE_RL_OUT", default_value = "results")]
    out: PathBuf,
    /// Concurrent trials; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(
        long,
        value_parser = PossibleValuesParser::new(["optimal", "random", "poor", "none"])
            .map(|s| s.parse::<TeacherQuality>().expect("listed value"))
    )]
    teacher: Option<TeacherQuality>,
    #[arg(
        long,
        value_parser = PossibleValuesParser::new(["mistake", "early"])
            .map(|s| s.parse::<AdviceStrategy>().expect("listed value"))
    )]
    strategy: Option<AdviceStrategy>,
}

impl From<&OverrideArgs> for Overrides {
    fn from(a: &OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            trials: a.trials,
            episodes: a.episodes,
            budget: a.budget,
            teacher: a.teacher,
            strategy: a.strategy,
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// `<group>_results.csv` files written by `run`.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Compare groups whose base configs differ.
    #[arg(long)]
    force: bool,
    /// Also write `comparison.csv` into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Take the domain, discount and tolerance from a config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// linear_chain, single_state or two_state.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = config::load(&args.config, &(&args.overrides).into())?;
    let (full, base) = digests(&cfg);
    let head = digest_line(&full, &base);
    let started = Instant::now();
    let result = Experiment::prepare(cfg.clone())?.run(args.jobs)?;
    let elapsed = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let group = cfg.group_name();
    let mut files = vec![
        ("curve.csv", artifacts::curve_csv(&head, &result)),
        ("eval.csv", artifacts::eval_csv(&head, &result)),
        ("results.csv", artifacts::results_csv(&head, &result)),
    ];
    if cfg.experiment.log_advice {
        files.push(("advice.csv", artifacts::advice_csv(&head, &result)));
    }
    let manifest_path = artifact_path(&args.out, &group, "manifest.toml");
    let mut outputs = Vec::new();
    for (kind, text) in &files {
        let path = artifact_path(&args.out, &group, kind);
        artifacts::write(&path, text)?;
        outputs.push(path.display().to_string());
    }
    outputs.push(manifest_path.display().to_string());
    let manifest = RunManifest {
        digest: full,
        base_digest: base,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        group: group.clone(),
        seed: cfg.experiment.seed,
        jobs: args.jobs,
        wall_clock_seconds: elapsed,
        outputs,
        config: cfg,
    };
    let body = toml::to_string(&manifest).map_err(|e| CliError::Other(e.to_string()))?;
    artifacts::write(&manifest_path, &format!("{head}{body}"))?;

    println!(
        "{group}: FR {:.2} ± {:.2}, TR {:.2} ± {:.2} over {} trials ({elapsed:.2}s)",
        result.fr_mean, result.fr_std, result.tr_mean, result.tr_std, result.trials
    );
    println!("wrote {} files to {}", files.len() + 1, args.out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let groups = args
        .results
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            compare::parse_results(p, &text)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cmp = compare::compare(groups, args.force)?;
    print!("{}", cmp.report());
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        artifacts::write(&dir.join("comparison.csv"), &cmp.csv())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleSpec {
    domain: DomainKind,
    length: usize,
    gamma: f64,
    tol: f64,
}

fn oracle_spec(args: &OracleArgs) -> Result<OracleSpec, CliError> {
    let mut spec = OracleSpec {
        domain: DomainKind::LinearChain,
        length: advice_core::env::DEFAULT_CHAIN_LENGTH,
        gamma: 0.8,
        tol: advice_core::oracle::DEFAULT_TOLERANCE,
    };
    if let Some(path) = &args.config {
        let cfg = config::load(path, &Overrides::default())?;
        spec.domain = cfg.domain.kind;
        spec.length = cfg.domain.length;
        spec.gamma = cfg.learner.gamma;
        spec.tol = cfg.teacher.oracle_tolerance;
    }
    if let Some(d) = &args.domain {
        spec.domain = serde_json::from_value(serde_json::Value::String(d.clone()))
            .map_err(|_| CliError::Config(format!("invalid `domain`: unknown domain {d:?}")))?;
    }
    spec.length = args.length.unwrap_or(spec.length);
    spec.gamma = args.gamma.unwrap_or(spec.gamma);
    spec.tol = args.tol.unwrap_or(spec.tol);
    if !(spec.gamma.is_finite() && (0.0..=1.0).contains(&spec.gamma)) {
        return Err(CliError::Config(format!(
            "invalid `gamma`: {} is not in [0, 1]",
            spec.gamma
        )));
    }
    if !(spec.tol.is_finite() && spec.tol > 0.0) {
        return Err(CliError::Config(format!(
            "invalid `tol`: {} is not a positive finite number",
            spec.tol
        )));
    }
    if spec.domain == DomainKind::LinearChain && spec.length < 2 {
        return Err(CliError::Config(
            "invalid `length`: a chain needs at least 2 states".into(),
        ));
    }
    Ok(spec)
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let spec = oracle_spec(args)?;
    let mdp = match spec.domain {
        DomainKind::LinearChain => LinearChain::new(spec.length).to_finite_mdp(),
        DomainKind::SingleState => SingleState::default().to_finite_mdp(),
        DomainKind::TwoState => TwoState::default().to_finite_mdp(),
        DomainKind::GridPursuit => {
            return Err(CliError::Config(
                "invalid `domain`: grid_pursuit has no finite state table".into(),
            ))
        }
    };
    let solved =
        value_iteration(&mdp, spec.gamma, spec.tol).map_err(|e| CliError::Other(e.to_string()))?;
    let digest = digest_of(&spec);
    let mut buf = digest_line(&digest, &digest).into_bytes();
    solved.q.write_csv(&mut buf).expect("writing to memory");
    let text = String::from_utf8(buf).expect("ascii CSV");
    match &args.out {
        Some(path) => {
            write_parent(path)?;
            artifacts::write(path, &text)?;
            eprintln!(
                "{} sweeps, Bellman residual {:.3e}; wrote {}",
                solved.iterations,
                solved.residual,
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: args.seed,
        ..Overrides::default()
    };
    let cfg = config::load(&args.config, &overrides)?;
    let (full, base) = digests(&cfg);
    let report = Experiment::prepare(cfg)?.check_assumptions()?;
    let text = format!("{}{report}\n", digest_line(&full, &base));
    print!("{text}");
    if let Some(path) = &args.out {
        write_parent(path)?;
        artifacts::write(path, &text)?;
    }
    Ok(())
}

fn write_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::CheckAssumptions(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("advice-rl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
