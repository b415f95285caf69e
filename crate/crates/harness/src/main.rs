use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pricedist_harness::synth::{write_bundle, SynthSpec};
use pricedist_harness::{pipeline, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "pricedist", version, about = "Distributional day-ahead price forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic panel, a matching config and oracle forecasts.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 800)]
        days: usize,
        #[arg(long, default_value_t = 4)]
        hours: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Validate the panel and write the cache.
    Ingest(ConfigArg),
    /// Per-hour hyperparameter search; writes the run manifest.
    Hpo(ConfigArg),
    /// Rolling out-of-sample forecasts, resuming from checkpoints.
    Forecast {
        #[command(flatten)]
        config: ConfigArg,
        /// Independent runs; overrides `run.runs`.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Naive, QRA and QRM benchmark forecasts.
    Bench(ConfigArg),
    /// CRPS tables and Diebold-Mariano tests over all forecast files.
    Eval(ConfigArg),
    /// Long-format data for plotting.
    ExportPlots(ConfigArg),
}

#[derive(clap::Args)]
struct ConfigArg {
    #[arg(long, env = "PRICEDIST_CONFIG")]
    config: PathBuf,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Synth { out, days, hours, seed } => {
            let spec = SynthSpec { days, hours, seed, ..Default::default() };
            write_bundle(&spec, &out)?;
            println!("{}", out.join("config.toml").display());
        }
        Command::Ingest(a) => {
            let p = pipeline::ingest(&RunConfig::load(&a.config)?)?;
            println!("{} days x {} hours", p.n_days(), p.hours());
        }
        Command::Hpo(a) => {
            let m = pipeline::hpo(&RunConfig::load(&a.config)?)?;
            println!("run {}", m.run_id);
        }
        Command::Forecast { config, runs } => {
            let mut cfg = RunConfig::load(&config.config)?;
            if let Some(r) = runs {
                cfg.run.runs = r;
                cfg.validate()?;
            }
            print_paths(&pipeline::forecast(&cfg, None)?);
        }
        Command::Bench(a) => print_paths(&pipeline::bench(&RunConfig::load(&a.config)?)?),
        Command::Eval(a) => {
            for (_, rep) in pipeline::eval(&RunConfig::load(&a.config)?)? {
                println!("{}", rep.text());
            }
        }
        Command::ExportPlots(a) => print_paths(&pipeline::export_plots(&RunConfig::load(&a.config)?)?),
    }
    Ok(())
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
