use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradflow::commands::parse_levels;
use gradflow::{cmd_compare, cmd_convergence, cmd_run, cmd_validate, CliError, RunArgs, THREADS_ENV};

/// Multi-species Wasserstein gradient flows by the semi-implicit JKO scheme.
///
/// Exit codes: 0 success, 1 hypothesis failure, 2 config error, 3 solver failure.
#[derive(Parser)]
#[command(name = "gradflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the energy, interaction and initial-data hypotheses.
    Validate { config: PathBuf },
    /// Run the scheme and write snapshots, time series and summaries.
    Run {
        config: PathBuf,
        /// Keep the previous density when a step fails and carry on.
        #[arg(long)]
        best_effort: bool,
        /// Output directory, instead of `outputs.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study over halving time steps.
    Convergence {
        config: PathBuf,
        /// Comma-separated time steps, each half the previous one.
        #[arg(long)]
        levels: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// W₂ distance between two run directories over time.
    Compare { a: PathBuf, b: PathBuf },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Validate { config } => cmd_validate(&config, out).map(drop),
        Command::Run {
            config,
            best_effort,
            out: dir,
        } => {
            let args = RunArgs {
                best_effort,
                out_dir: dir,
            };
            cmd_run(&config, &args, out).map(drop)
        }
        Command::Convergence {
            config,
            levels,
            out: dir,
        } => {
            let levels = parse_levels(&levels)?;
            cmd_convergence(&config, &levels, dir.as_deref(), out).map(drop)
        }
        Command::Compare { a, b } => cmd_compare(&a, &b, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
