use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use minkowski_cli::config::Strategy;
use minkowski_cli::{cmd_curvatures, cmd_dualcheck, cmd_verify, Outcome, Overrides};

/// Verify transnormal and isoparametric functions on Minkowski spaces.
///
/// Exit status: 0 on success, 2 when a verdict or residual check fails,
/// 1 on configuration or runtime errors. Set MINKOWSKI_LOG (e.g. `info`)
/// for progress output.
#[derive(Parser)]
#[command(name = "minkowski", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the direction sets (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Constancy or residual tolerance (overrides the scenario).
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Derivative strategy (overrides `strategy`).
    #[arg(long, global = true, value_enum)]
    strategy: Option<Strategy>,
}

#[derive(Subcommand)]
enum Command {
    /// Transnormal and isoparametric verdicts with a JSON report and sample CSV.
    Verify { config: PathBuf },
    /// Per-level principal curvature table.
    Curvatures { config: PathBuf },
    /// Legendre, dual-norm and Cartan-curvature residual suites.
    Dualcheck { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MINKOWSKI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit 2 is reserved for failed checks.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            eprintln!("error: --tol must be positive, got {tol}");
            return ExitCode::from(1);
        }
    }
    let o = Overrides { out: cli.out, seed: cli.seed, tol: cli.tol, strategy: cli.strategy };
    let result = match &cli.command {
        Command::Verify { config } => cmd_verify(config, &o),
        Command::Curvatures { config } => cmd_curvatures(config, &o),
        Command::Dualcheck { config } => cmd_dualcheck(config, &o),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
