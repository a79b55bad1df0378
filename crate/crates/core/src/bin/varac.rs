use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use varac::harness::{
    eval_report, export_history, grad_check, run_training, Experiment, Fault, GradCheckOptions,
};

/// Variance-penalized episodic actor-critic on finite MDPs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and write the history CSV to the configured output path.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output path from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the oracle report for the initial policy as JSON.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare analytic, finite-difference and Monte Carlo gradients.
    /// Exits with status 1 if any check fails.
    GradCheck {
        #[arg(long)]
        config: PathBuf,
        /// Episodes for the Monte Carlo check (0 skips it).
        #[arg(long, default_value_t = 100_000)]
        episodes: u64,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
        /// Corrupt the oracle on purpose (self-test of the checks).
        #[arg(long, value_enum, hide = true)]
        fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    NegateQtilde,
}

fn load(path: &PathBuf) -> Result<Experiment> {
    Experiment::load(path).with_context(|| format!("loading experiment {}", path.display()))
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, output, seed } => {
            let mut exp = load(&config)?;
            if let Some(o) = output {
                exp.config.output = o;
            }
            if let Some(s) = seed {
                exp.config.seed = s;
            }
            let history = run_training(&exp)?;
            export_history(&history, &exp.config.output)?;
            let last = history.last();
            info!("wrote {} records to {}", history.records.len(), exp.config.output.display());
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "output": exp.config.output,
                    "records": history.records.len(),
                    "final": last,
                    "critic": history.final_critic,
                }))?
            );
        }
        Command::Eval { config } => {
            let exp = load(&config)?;
            println!("{}", serde_json::to_string_pretty(&eval_report(&exp)?)?);
        }
        Command::GradCheck {
            config,
            episodes,
            json,
            fault,
        } => {
            let exp = load(&config)?;
            let opts = GradCheckOptions {
                mc_episodes: episodes,
                fault: fault.map(|FaultArg::NegateQtilde| Fault::NegateQtilde),
                ..GradCheckOptions::default()
            };
            let report = grad_check(&exp, &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            if !report.pass {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
