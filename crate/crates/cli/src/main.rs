use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ptycho_cli::commands;
use ptycho_cli::ExperimentConfig;

/// Blind-ptychography experiments: simulation, scan audits, ambiguity
/// construction, and reconstruction, driven by key=value config files.
#[derive(Parser)]
#[command(name = "ptycho", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate diffraction data; writes object.ptyc, probe.ptyc,
    /// pattern.txt, and data.ptyd into the output directory.
    Simulate { config: PathBuf },
    /// Audit a scan pattern against the uniqueness conditions.
    Audit {
        /// Pattern table file (as written by `simulate` or `pattern`).
        pattern: Option<PathBuf>,
        /// Probe side length the pattern is audited against.
        #[arg(short = 'm', long = "probe-size")]
        probe_size: Option<usize>,
        /// Audit the pattern described by a config instead of a file.
        #[arg(long, conflicts_with_all = ["pattern", "probe_size"])]
        config: Option<PathBuf>,
    },
    /// Construct an ambiguity pair (g, nu) for the configured truth and
    /// verify it reproduces the same data.
    Ambiguity { config: PathBuf },
    /// Reconstruct object and probe from data.ptyd; writes f_est.ptyc,
    /// mu_est.ptyc, and convergence.csv.
    Reconstruct { config: PathBuf },
    /// Write the effective scan pattern of a config to a file.
    Pattern { config: PathBuf, output: PathBuf },
}

fn run() -> ptycho_core::Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config } => {
            commands::cmd_simulate(&ExperimentConfig::from_file(&config)?)
        }
        Command::Audit {
            pattern,
            probe_size,
            config,
        } => match (pattern, probe_size, config) {
            (_, _, Some(cfg)) => commands::cmd_audit_config(&ExperimentConfig::from_file(&cfg)?),
            (Some(path), Some(m), None) => commands::cmd_audit_file(&path, m),
            _ => Err(ptycho_core::Error::Parse(
                "audit needs either <pattern> --probe-size M or --config FILE".into(),
            )),
        },
        Command::Ambiguity { config } => {
            commands::cmd_ambiguity(&ExperimentConfig::from_file(&config)?)
        }
        Command::Reconstruct { config } => {
            commands::cmd_reconstruct(&ExperimentConfig::from_file(&config)?)
        }
        Command::Pattern { config, output } => {
            commands::cmd_pattern(&ExperimentConfig::from_file(&config)?, &output)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
