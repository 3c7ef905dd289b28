//! `ncauth`: key generation, network simulation, attack experiments,
//! goodput tables and file-distribution sizing.

mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncauth::filedist::Accounting;

use crate::config::{OutputFormat, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
}

#[derive(Parser)]
#[command(name = "ncauth", version, about = "Authentication codes for multicast network coding")]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice; required.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Write the report here instead of stdout (a directory for keygen).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate source key, public points and verifier keys.
    Keygen,
    /// Run one coding session through the configured network.
    Simulate,
    /// Run the substitution experiment.
    Attack,
    /// Goodput table for a topology.
    Goodput {
        /// Built-in name (topo_a_fig1, topo_a_table, topo_b, topo_c) or path.
        #[arg(long)]
        topology: Option<String>,
        /// Also check every placement by simulation.
        #[arg(long)]
        simulate: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Generation size and key reuse needed for given file sizes.
    Filedist {
        /// Sizes such as 18M or 1.8G; defaults to the four reference sizes.
        sizes: Vec<String>,
        /// Count 1480-byte payloads instead of 1500-byte frames.
        #[arg(long)]
        payload: bool,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let seed = cli.seed.ok_or_else(|| CliError::Config("--seed is required".into()))?;
    let cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let need_config = || match cli.config {
        Some(_) => Ok(()),
        None => Err(CliError::Config("--config is required for this command".into())),
    };
    let json = cli.json || cfg.output == Some(OutputFormat::Json);
    let out = match &cli.command {
        Command::Keygen => {
            need_config()?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let out = commands::keygen(&cfg, seed, &dir)?;
            return emit(&out, json, None);
        }
        Command::Simulate => {
            need_config()?;
            commands::simulate(&cfg, seed)?
        }
        Command::Attack => {
            need_config()?;
            commands::attack(&cfg, seed)?
        }
        Command::Goodput { topology, simulate, csv } => {
            let name = topology
                .clone()
                .or_else(|| cfg.goodput.topology.clone())
                .or_else(|| cfg.network.clone())
                .ok_or_else(|| CliError::Config("no topology given".into()))?;
            commands::goodput(&cfg, seed, &name, *simulate || cfg.goodput.simulate, *csv || cfg.goodput.csv)?
        }
        Command::Filedist { sizes, payload } => {
            let sizes = if sizes.is_empty() { cfg.filedist.sizes.clone() } else { sizes.clone() };
            let accounting = if *payload { Accounting::Payload } else { cfg.filedist.accounting };
            commands::filedist(&sizes, accounting)?
        }
    };
    emit(&out, json, cli.out.as_deref())
}

fn emit(out: &commands::Output, json: bool, path: Option<&std::path::Path>) -> Result<ExitCode, CliError> {
    let body = if json {
        let mut s = serde_json::to_string_pretty(&out.json).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        s
    } else {
        out.text.clone()
    };
    match path {
        Some(p) => fs::write(p, body).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => print!("{body}"),
    }
    if out.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &out.failures {
        eprintln!("check failed: {f}");
    }
    Ok(ExitCode::from(3))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
