//! `fogdrip` command line: simulation, phase diagram, Wulff geometry, exact
//! checks and δ-sweeps. Exit status 0 on success, 1 on a runtime failure or a
//! failed check, 2 on a configuration error, 3 when a run finished but some
//! estimate stopped on its budget or failed its convergence check.

mod commands;
mod config;
mod run;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, OracleArgs, PhaseArgs, SimulateArgs, SweepArgs, WulffArgs};

#[derive(Parser, Debug)]
#[command(name = "fogdrip", version, about = "SOS interface sampler and phase-diagram solver", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run replicate Metropolis chains and record time series and final fields.
    Simulate(SimulateArgs),
    /// Critical supersaturations and the radii table of the variational problem.
    PhaseDiagram(PhaseArgs),
    /// Wulff shape and the restricted problem over an area grid.
    Wulff(WulffArgs),
    /// Compare exhaustive enumeration with stored reference values.
    OracleCheck(OracleArgs),
    /// Monolayer census over a grid of supersaturations.
    Sweep(SweepArgs),
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FOGDRIP_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("FOGDRIP_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        return Err("FOGDRIP_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::PhaseDiagram(a) => commands::phase_diagram(a),
        Command::Wulff(a) => commands::wulff(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(o) if o.partial => {
            eprintln!("partial: some estimate stopped on its budget; outputs in {}", o.dir.display());
            ExitCode::from(3)
        }
        Ok(o) => {
            eprintln!("outputs in {}", o.dir.display());
            ExitCode::SUCCESS
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(1)
        }
    }
}
