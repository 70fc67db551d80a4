// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

/// Compile and emulate time-dependent Hamiltonians on tunably coupled qubits.
#[derive(Parser)]
#[command(name = "sesim", version)]
struct Cli {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Coupling limit g_max/h in MHz.
    #[arg(long, global = true)]
    gmax: Option<f64>,
    /// Safety margin applied to the λ envelope (≥ 1).
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Map energies with the ε_max + ΔE/λ sign instead of ε_max − ΔE/λ.
    #[arg(long, global = true)]
    sign_as_printed: bool,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, env = "SESIM_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration, channel data and target Hamiltonian.
    Validate,
    /// Write the control schedule, λ profile and hardware-time map.
    Compile,
    /// Compile (or load a schedule) and score the emulation.
    Simulate {
        /// Use a previously written schedule.json instead of compiling.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Sweep g_max and/or impact parameter.
    Sweep {
        /// Sweep plan (JSON); defaults to the `sweep` section of the config.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> sesim::Result<()> {
    let overrides = Overrides {
        out: cli.out.clone(),
        g_max_mhz: cli.gmax,
        margin: cli.margin,
        sign_as_printed: cli.sign_as_printed,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Validate => commands::validate(&cfg),
        Command::Compile => commands::compile(&cfg),
        Command::Simulate { schedule } => commands::simulate(&cfg, schedule.as_ref()),
        Command::Sweep { plan } => commands::sweep(&cfg, plan.as_ref(), cli.workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
