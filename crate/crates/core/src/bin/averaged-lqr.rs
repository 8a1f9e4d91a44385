use std::path::{Path, PathBuf};
use std::process::ExitCode;

use averaged_lqr::experiment::{self, reference, ExperimentConfig, ExperimentReport, SolveMode};
use averaged_lqr::Error;
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(version, about = "Averaged LQR solver and convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// known dynamics
    A,
    /// averaged over the measure family
    B,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config; the built-in oscillator setup when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of time steps (overrides the config)
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write trajectory/control CSVs
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "a")]
        mode: Mode,
        /// Level of the measure family for mode B (first configured level by default)
        #[arg(long)]
        level: Option<u32>,
    },
    /// Compute the convergence table
    Table1 {
        #[command(flatten)]
        common: Common,
        /// Compare against the reference table; exit 4 on mismatch
        #[arg(long)]
        check: bool,
    },
    /// Convergence table plus a discretization study and seeded Lipschitz spot checks
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        check: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// An error and the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_config_error() { EXIT_CONFIG } else { EXIT_SOLVER };
        Failure { code, error }
    }
}

/// Every failure while reading or validating the config is a config error, I/O included.
fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    load_config(common).map_err(|error| Failure {
        code: EXIT_CONFIG,
        error,
    })
}

fn load_config(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(steps) = common.steps {
        config.steps = steps;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    config.validate()?;
    Ok((config, out))
}

fn print_table(report: &ExperimentReport) {
    println!("{:>3} {:>10} {:>12} {:>6} {:>12} {:>6} {:>12}", "N", "alpha1", "value err", "order", "control err", "order", "W1");
    let order = |o: Option<f64>| o.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    for r in &report.rows {
        println!(
            "{:>3} {:>10.6} {:>12.3e} {:>6} {:>12.3e} {:>6} {:>12.3e}",
            r.n,
            r.alpha1,
            r.value_error,
            order(r.value_order),
            r.control_error,
            order(r.control_order),
            r.w1
        );
    }
}

fn finish(report: &ExperimentReport, out: &Path, check: bool) -> Result<u8, Error> {
    for path in experiment::write_report(report, out)? {
        eprintln!("wrote {}", path.display());
    }
    print_table(report);
    if !check {
        return Ok(0);
    }
    let outcomes = reference::check_report(report);
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).collect();
    for o in &failed {
        eprintln!("check failed: {} ({})", o.name, o.detail);
    }
    println!("check: {}/{} passed", outcomes.len() - failed.len(), outcomes.len());
    Ok(if failed.is_empty() { 0 } else { EXIT_CHECK })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Solve { common, mode, level } => {
            let (config, out) = load(&common)?;
            let mode = match mode {
                Mode::A => SolveMode::KnownDynamics,
                Mode::B => SolveMode::Averaged {
                    level: level.unwrap_or(config.n_range[0]),
                },
            };
            for path in experiment::run_solve(&config, mode, &out)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Table1 { common, check } => {
            let (config, out) = load(&common)?;
            Ok(finish(&experiment::run_table1(&config)?, &out, check)?)
        }
        Command::Sweep { common, check, seed } => {
            let (config, out) = load(&common)?;
            Ok(finish(&experiment::run_sweep(&config, seed)?, &out, check)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error}");
            ExitCode::from(code)
        }
    }
}
