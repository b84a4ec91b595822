//! Thin command-line front end; all the work lives in the library's
//! `runner` module. Exit codes: 0 success, 1 configuration error, 2 solver
//! failure, 3 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pauli_fierz::config::{config_reference, RunConfig};
use pauli_fierz::error::Result;
use pauli_fierz::report::RunReport;
use pauli_fierz::runner;

#[derive(Parser)]
#[command(
    name = "pfsim",
    version,
    about = "Truncated Pauli-Fierz simulator: ground states, resolvent boundary values, \
             one-photon T- and S-matrices, and their verification suite"
)]
struct Cli {
    /// Print the configuration key reference and exit.
    #[arg(long)]
    config_reference: bool,

    /// Path to a TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports, CSV/JSON artifacts, and plot scripts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the interacting ground state and its quality metadata.
    GroundState,
    /// Run the full invariant suite (CCR, commutators, pull-through,
    /// phase integral, Abelian limits, bound diagnostics).
    Verify,
    /// Tabulate the T-matrix over mode pairs with an eta sweep.
    Tmatrix,
    /// Two-path S-matrix comparison with an eps sweep.
    Smatrix,
    /// Parameter sweeps: boundary values or pull-through residuals.
    Sweep,
}

fn run(cli: &Cli, command: &Command) -> Result<RunReport> {
    let config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    match command {
        Command::GroundState => runner::cmd_ground_state(&config, &cli.out, cli.seed),
        Command::Verify => runner::cmd_verify(&config, &cli.out, cli.seed),
        Command::Tmatrix => runner::cmd_tmatrix(&config, &cli.out, cli.seed),
        Command::Smatrix => runner::cmd_smatrix(&config, &cli.out, cli.seed),
        Command::Sweep => runner::cmd_sweep(&config, &cli.out, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if cli.config_reference {
        print!("{}", config_reference());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!(
            "error: a subcommand is required (ground-state | verify | tmatrix | smatrix | sweep)"
        );
        return ExitCode::from(1);
    };
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let started = std::time::Instant::now();
    let outcome = run(&cli, command);
    let code = runner::exit_code(&outcome);
    match &outcome {
        Ok(report) => {
            print!("{}", report.render_text());
            eprintln!("elapsed: {:.2}s", started.elapsed().as_secs_f64());
        }
        Err(err) => eprintln!("error: {err}"),
    }
    ExitCode::from(code as u8)
}
