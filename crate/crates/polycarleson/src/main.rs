use std::io::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polycarleson::commands;
use polycarleson::config::{ExperimentConfig, Overrides};
use polycarleson::error::AppResult;
use polycarleson::symbols::named;

/// Carleson-box experiments for composition operators with polynomial
/// symbols on weighted Bergman spaces of the polydisc.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Boundedness verdicts from the contact-rank criteria.
    Decide,
    /// Sublevel volume exponent of one component.
    Exponent {
        /// 1-based component of the symbol.
        #[arg(long)]
        component: Option<usize>,
        /// Level `η = e^{i·angle}`.
        #[arg(long, allow_hyphen_values = true)]
        eta_angle: Option<f64>,
    },
    /// Carleson ratio growth over shrinking boxes.
    Carleson {
        /// Weights to scan, comma-separated; overrides --beta.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        betas: Vec<f64>,
    },
    /// Dump the contact set of some components.
    Contact {
        /// 1-based component indices, comma-separated.
        #[arg(long, value_delimiter = ',')]
        indices: Vec<usize>,
    },
    /// Run the inequality property battery.
    CheckProps,
    /// Run the pinned acceptance battery.
    Battery {
        /// Criteria to run, comma-separated; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// List the named symbols.
    Symbols,
}

fn run(cli: Cli) -> AppResult<u8> {
    let mut cfg: ExperimentConfig = cli.overrides.resolve()?;
    match cli.command {
        Command::Decide => commands::decide(&cfg),
        Command::Exponent { component, eta_angle } => {
            if let Some(c) = component {
                cfg.component = c
                    .checked_sub(1)
                    .ok_or_else(|| polycarleson::error::AppError::Usage("components are numbered from 1".into()))?;
            }
            if let Some(a) = eta_angle {
                cfg.eta_angle = a;
            }
            commands::exponent(&cfg)
        }
        Command::Carleson { betas } => {
            if !betas.is_empty() {
                cfg.betas = betas;
            }
            commands::carleson(&cfg)
        }
        Command::Contact { indices } => {
            if !indices.is_empty() {
                cfg.indices = Some(indices);
            }
            commands::contact(&cfg)
        }
        Command::CheckProps => commands::check_props(&cfg),
        Command::Battery { only } => {
            if !only.is_empty() {
                cfg.only = only;
            }
            commands::run_battery(&cfg)
        }
        Command::Symbols => {
            let mut out = std::io::stdout().lock();
            for s in named() {
                let _ = writeln!(out, "{:<18} {}", s.name, s.description);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
