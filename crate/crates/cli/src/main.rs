use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatlab::config::{ExperimentConfig, ExperimentKind, Overrides};
use heatlab::experiment::run_experiment;
use heatlab::report::{emit_report, render_text};

/// Heat kernels on evolving metrics, with numerical verification checks.
///
/// Exit status: 0 when every check passes, 1 on a failed check, 2 when
/// nothing failed but some checks were vacuous or skipped, 3 on errors.
#[derive(Parser, Debug)]
#[command(name = "heatlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve from the configured initial data.
    Solve(RunArgs),
    /// Approximate the fundamental solution.
    Kernel(RunArgs),
    /// Mass evolution and boundary mass checks.
    VerifyMass(RunArgs),
    /// Rate choice, reverse Poincare inequalities and the mean value ratio.
    VerifyMvi(RunArgs),
    /// Cutoff constants, cutoff heat inequality and the local lower bound.
    VerifyCutoff(RunArgs),
    /// Kernel/adjoint duality and delta-width halving.
    VerifyDuality(RunArgs),
    /// Delta-property sandwich and positivity.
    VerifyDelta(RunArgs),
    /// Convergence of kernels along a metric sequence.
    CgRun(RunArgs),
    /// Print the canonical config and its digest.
    ShowConfig(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cells per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Tolerance override, repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    tolerances: Vec<(String, f64)>,
    /// Number of sequence members.
    #[arg(long)]
    k_max: Option<usize>,
    /// Do not print the report to stdout.
    #[arg(long, short)]
    quiet: bool,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("tolerance `{name}`: {e}"))?;
    if !(value >= 0.0) {
        return Err(format!("tolerance `{name}` must be nonnegative"));
    }
    Ok((name.trim().to_string(), value))
}

impl Command {
    fn split(self) -> (Option<ExperimentKind>, RunArgs) {
        match self {
            Command::Solve(a) => (Some(ExperimentKind::Solve), a),
            Command::Kernel(a) => (Some(ExperimentKind::Kernel), a),
            Command::VerifyMass(a) => (Some(ExperimentKind::VerifyMass), a),
            Command::VerifyMvi(a) => (Some(ExperimentKind::VerifyMvi), a),
            Command::VerifyCutoff(a) => (Some(ExperimentKind::VerifyCutoff), a),
            Command::VerifyDuality(a) => (Some(ExperimentKind::VerifyDuality), a),
            Command::VerifyDelta(a) => (Some(ExperimentKind::VerifyDelta), a),
            Command::CgRun(a) => (Some(ExperimentKind::CgRun), a),
            Command::ShowConfig(a) => (None, a),
        }
    }
}

fn run(cli: Cli) -> heatlab::Result<i32> {
    let (kind, args) = cli.command.split();
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply(&Overrides {
        grid: args.grid,
        dt: args.dt,
        k_max: args.k_max,
        output_dir: args.out.map(|p| p.display().to_string()),
        tolerances: args.tolerances,
    });
    let Some(kind) = kind else {
        print!("# config-digest: {}\n{}", config.digest(), config.to_toml());
        return Ok(0);
    };
    config.experiment = kind;
    let outcome = run_experiment(&config)?;
    let dir = PathBuf::from(&config.output_dir);
    let written = emit_report(&outcome.reports, &outcome.tables, &outcome.digest, &dir)?;
    if !args.quiet {
        print!("{}", render_text(&outcome.reports, &outcome.digest)?);
        for path in written {
            println!("# wrote {}", path.display());
        }
    }
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("heatlab: {e}");
            ExitCode::from(3)
        }
    }
}
