//! Command-line front end for the tilt-optimization laboratory.
//!
//! Exit codes: 0 success, 1 run failure (a seed crashed, a bound was
//! violated, a gradient check failed), 2 configuration error (bad file,
//! unknown key, invalid combination, usage error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tiltlab_cli::config::ExperimentConfig;
use tiltlab_cli::{agg, checks, evalcmd, pretrain, run, sweep, CliError};

#[derive(Parser)]
#[command(name = "tiltlab", version, about = "Antenna-tilt policy laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.total_steps=5000`.
    /// Repeatable; applied after the file in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::load(self.config.as_deref(), &self.sets)
    }

    /// Schema-checked but not semantically validated — for subcommands that
    /// rewrite part of the config before validating (pretraining ignores the
    /// configured method and baseline path).
    fn load_raw(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::load_raw(self.config.as_deref(), &self.sets)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a building-free baseline actor and save its checkpoint.
    PretrainBaseline(ConfigArgs),
    /// Run the configured method over all seeds and write per-seed and
    /// aggregate CSVs plus a manifest.
    Train(ConfigArgs),
    /// Re-run training across burn-in lengths and report the early
    /// performance dip for each.
    BurnInSweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated burn-in lengths (environment steps).
        #[arg(long, value_delimiter = ',', required = true)]
        cbi: Vec<u64>,
    },
    /// Combine finished run directories into comparison and summary CSVs.
    Aggregate {
        /// Run directories (each containing manifest.json and aggregate.csv).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Output directory for comparison.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify the value-difference bounds on randomized tabular instances.
    BoundsCheck {
        /// Randomized instances per bound family.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory for per-family tightness CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a saved actor checkpoint on the configured environment.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Actor checkpoint to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::PretrainBaseline(args) => {
            let cfg = args.load_raw()?;
            pretrain::pretrain_baseline(&cfg)?;
            Ok(())
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            run::train_command(&cfg)?;
            Ok(())
        }
        Command::BurnInSweep { config, cbi } => {
            let cfg = config.load()?;
            sweep::burn_in_sweep(&cfg, &cbi)?;
            Ok(())
        }
        Command::Aggregate { runs, out } => {
            agg::aggregate_command(&runs, &out)?;
            Ok(())
        }
        Command::BoundsCheck {
            instances,
            seed,
            out,
        } => checks::bounds_check_command(instances, seed, out.as_ref()),
        Command::Gradcheck { seed } => checks::gradcheck_command(seed),
        Command::Eval { config, checkpoint } => {
            let cfg = config.load()?;
            evalcmd::eval_command(&cfg, &checkpoint)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
