//! `tenmon`: simulate, fit and monitor TEN processes from JSON configs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use tenmon_core::data::Statistic;
use tenmon_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "tenmon",
    version,
    about = "Network autoregressive modelling and CUSUM monitoring of TEN processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run simulation scenarios and write mean intensity curves.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Chart significance level.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Fit the model on Phase I of a flow export.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_statistic)]
        statistic: Option<Statistic>,
    },
    /// Calibrate charts on Phase I and monitor Phase II.
    Monitor {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_statistic)]
        statistic: Option<Statistic>,
        /// Seed of the critical-value simulation.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        /// Network alarm threshold on the change intensity.
        #[arg(long)]
        threshold_w: Option<f64>,
    },
    /// Sample a graph or derive the pair graph of a flow export.
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(cli: Cli) -> tenmon_core::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            alpha,
            nu,
        } => commands::simulate(commands::SimulateArgs {
            config,
            seed,
            out,
            alpha,
            nu,
        }),
        Command::Fit {
            config,
            out,
            statistic,
        } => commands::fit(commands::FitArgs {
            config,
            out,
            statistic,
        }),
        Command::Monitor {
            config,
            out,
            statistic,
            seed,
            alpha,
            nu,
            threshold_w,
        } => commands::monitor(commands::MonitorArgs {
            config,
            out,
            statistic,
            seed,
            alpha,
            nu,
            threshold_w,
        }),
        Command::Graph { config, seed, out } => {
            commands::graph(commands::GraphArgs { config, seed, out })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Config => ("config", 2),
                ErrorKind::Data => ("data", 3),
                ErrorKind::Numeric => ("numeric", 4),
            };
            eprintln!(
                "{}",
                json!({ "error": { "kind": kind, "message": e.to_string() } })
            );
            ExitCode::from(code)
        }
    }
}
