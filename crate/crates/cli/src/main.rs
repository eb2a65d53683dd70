use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use spinsqueeze::experiment::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser, Debug)]
#[command(
    name = "spinsqueeze",
    version,
    about = "Spin squeezing of finite-temperature two-component condensates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config; fields left out take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed of the realization schedule.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for the CSV tables and manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic squeezing tables.
    Analytics,
    /// Draw thermal fields into the sample cache.
    Sample,
    /// Full simulation of every configured point, with curves.
    Run,
    /// Full simulation reporting only summaries per point.
    Sweep,
    /// Regenerate the data behind one of the study's figures.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=8))]
        number: u8,
    },
}

fn build_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = match (&cli.common.config, &cli.command) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Command::Figure { number }) => ExperimentConfig::figure_preset(*number),
        (None, _) => ExperimentConfig::default(),
    };
    config.kind = match cli.command {
        Command::Analytics => ExperimentKind::Analytics,
        Command::Sample => ExperimentKind::Sample,
        Command::Run => ExperimentKind::Run,
        Command::Sweep => ExperimentKind::Sweep,
        Command::Figure { number } => {
            config.figure = Some(number);
            ExperimentKind::Figure
        }
    };
    if let Some(seed) = cli.common.seed {
        config.base_seed = seed;
    }
    if let Some(workers) = cli.common.workers {
        config.workers = workers;
    }
    if let Some(out) = &cli.common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> anyhow::Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = build_config(&cli)?;
    let bundle = run_experiment(&config)?;
    bundle
        .write(&config.out_dir)
        .with_context(|| format!("writing results to {}", config.out_dir.display()))?;
    log::info!(
        "{} rows in {:.1}s written to {}",
        bundle.rows.len(),
        bundle.manifest.wall_time_seconds,
        config.out_dir.display()
    );
    if bundle.complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        for failure in &bundle.manifest.failures {
            log::error!("{:?}: {}", failure.point, failure.message);
        }
        Ok(ExitCode::from(2))
    }
}
