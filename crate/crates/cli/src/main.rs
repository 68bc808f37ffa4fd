//! `raman-sim`: command-line front end for the cavity Raman photon simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use raman_core::config::{parse_config, ExperimentConfig};
use raman_core::output::{run_command, Command};

#[derive(Parser, Debug)]
#[command(name = "raman-sim", version, about = "Single-photon emission from an atom in a two-mode cavity")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Configuration file (key = value, sectioned). Its `preset` key, if any,
    /// takes precedence over --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in parameter set: ideal-paper or rb87-paper.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory; defaults to the config's `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Exit with a nonzero status if any grid point fails.
    #[arg(long, global = true)]
    strict: bool,

    /// Integrator step in µs.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Accepted for explicitness; every run is deterministic and uses no RNG.
    #[arg(long, global = true)]
    seedless: bool,

    /// Worker threads for scans (default: all cores, or RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Integrate one pulse and write the trajectory.
    Evolve,
    /// Sweep the cavity–atom detuning with the pump on Raman resonance.
    ScanCavity,
    /// Sweep the cavity–pump detuning at fixed cavity–atom detuning.
    ScanPump,
    /// Locate detunings where σ⁺ and σ⁻ efficiencies are equal.
    Crossings,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Evolve => Command::Evolve,
            Cmd::ScanCavity => Command::ScanCavity,
            Cmd::ScanPump => Command::ScanPump,
            Cmd::Crossings => Command::Crossings,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut config = match &cli.config {
        Some(path) => {
            let mut text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            if let Some(p) = &cli.preset {
                if !text.lines().any(|l| l.trim_start().starts_with("preset") || l.contains("model.preset")) {
                    text = format!("model.preset = {p}\n{text}");
                }
            }
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::preset(cli.preset.as_deref().unwrap_or("ideal-paper")).map_err(|e| e.to_string())?,
    };
    if let Some(dt) = cli.dt {
        config.dt_us = dt;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon_pool(n) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    log::info!("resolved configuration:\n{}", config.to_text());

    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.output_dir));
    let report = match run_command(&config, cli.command.into(), &out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    for line in &report.summary {
        println!("{line}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("failed: {f}");
        }
        if cli.strict {
            eprintln!("error: {} failed grid point(s) in strict mode", report.failures.len());
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}

fn rayon_pool(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
