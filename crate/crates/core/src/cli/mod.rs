//! Experiment driver behind the `netslice` binary: scenario files, seeded
//! channels, sweeps across regimes and methods, and CSV output.

mod channels;
pub mod presets;
mod run;
mod scenario_file;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

pub use channels::generate_channels;
pub use run::{
    csv_header, csv_line, feasibility, format_number, run_study, status_of, write_csv, FeasibilityOutcome, ResultRow,
    OPTIMAL, PRB_METHOD,
};
pub use scenario_file::{
    AllocationSpec, ChannelSource, MethodChoice, QosSpec, ScenarioFile, SliceSpec, SolverSpec, Study, SweepSpec,
    UserDefaults, UserSpec, DEFAULT_ALPHA_COUNT,
};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "NETSLICE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "netslice",
    version,
    about = "Pareto boundaries of energy efficiency and throughput for sliced MISO downlinks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep every regime and method of a scenario and write a CSV.
    Run {
        scenario: PathBuf,
        /// Output file, `-` for stdout.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check the scenario's allocation, or find a strictly feasible point
    /// in each regime.
    Feasible { scenario: PathBuf },
    /// Bundled scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetAction {
    List,
    /// Print a preset's scenario file.
    Emit {
        name: String,
    },
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { scenario, output } => {
            let study = ScenarioFile::load(&scenario)?.study()?;
            let rows = run_study(&study);
            let sc = &study.instance.scenario;
            if output.as_os_str() == "-" {
                write_csv(io::stdout().lock(), sc.num_slices(), sc.num_users(), &rows)?;
            } else {
                let file = File::create(&output).with_context(|| format!("creating {}", output.display()))?;
                write_csv(BufWriter::new(file), sc.num_slices(), sc.num_users(), &rows)
                    .with_context(|| format!("writing {}", output.display()))?;
            }
            let failed = rows.iter().filter(|r| !r.is_optimal()).count();
            if failed > 0 {
                log::warn!("{failed} of {} rows not optimal", rows.len());
                Ok(EXIT_PARTIAL)
            } else {
                Ok(EXIT_OK)
            }
        }
        Command::Feasible { scenario } => {
            let study = ScenarioFile::load(&scenario)?.study()?;
            let outcomes = feasibility(&study)?;
            let mut out = io::stdout().lock();
            for o in &outcomes {
                let verdict = if o.feasible { "feasible" } else { "infeasible" };
                writeln!(out, "== {}: {verdict}", o.label)?;
                write!(out, "{}", o.text)?;
            }
            Ok(if outcomes.iter().all(|o| o.feasible) {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            })
        }
        Command::Presets { action } => {
            let mut out = io::stdout().lock();
            match action {
                PresetAction::List => {
                    for p in presets::ALL {
                        writeln!(out, "{:<22} {}", p.name, p.summary)?;
                    }
                }
                PresetAction::Emit { name } => {
                    let p = presets::find(&name).with_context(|| {
                        let names: Vec<_> = presets::ALL.iter().map(|p| p.name).collect();
                        format!("unknown preset {name:?}; available: {}", names.join(", "))
                    })?;
                    write!(out, "{}", p.text)?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}
