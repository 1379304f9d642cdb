//! `hwcert <subcommand> --config <path> [--seed N] [--out DIR] [--workers K]`

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand as ClapSubcommand};
use hwcert::experiment::{
    self, emit_plot_script, ExperimentConfig, PlotKind, RunOptions, Subcommand,
};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "hwcert",
    version,
    about = "Hanson-Wright chaos and circulant RIP experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "HWCERT_OUT_DIR", default_value = "results")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, ClapSubcommand)]
enum Command {
    /// Draw symmetric Weibull samples.
    Sample(RunArgs),
    /// Monte Carlo L_p norms of a Weibull law.
    Moments(RunArgs),
    /// Monte Carlo tail curve of a scalar statistic.
    Tails(RunArgs),
    /// Uniform chaos tail against the fitted bound on a V_x family.
    Chaos(RunArgs),
    /// Decoupling constants on random square families.
    Decouple(RunArgs),
    /// Chaining surrogates and covering bounds for a V_x family.
    Gamma(RunArgs),
    /// RIP success table for partial random circulant matrices.
    Rip(RunArgs),
    /// Write a plotting script for a result CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// tail_overlay, phase_diagram or moment_growth.
        #[arg(long)]
        kind: String,
    },
    /// Re-run the config stored in a run record.
    Replay {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, env = "HWCERT_OUT_DIR", default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn run_subcommand(sub: Subcommand, args: &RunArgs) -> Result<serde_json::Value> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let config = ExperimentConfig::from_json(&text)?;
    if config.subcommand != sub {
        bail!(hwcert::Error::Config(format!(
            "config is for `{}`, not `{}`",
            config.subcommand.name(),
            sub.name()
        )));
    }
    let opts = RunOptions {
        out_dir: args.out.clone(),
        workers: args.workers,
        seed: args.seed,
    };
    Ok(serde_json::to_value(experiment::run(&config, &opts)?)?)
}

fn dispatch(cli: Cli) -> Result<serde_json::Value> {
    let (sub, args) = match &cli.command {
        Command::Sample(a) => (Subcommand::Sample, a),
        Command::Moments(a) => (Subcommand::Moments, a),
        Command::Tails(a) => (Subcommand::Tails, a),
        Command::Chaos(a) => (Subcommand::Chaos, a),
        Command::Decouple(a) => (Subcommand::Decouple, a),
        Command::Gamma(a) => (Subcommand::Gamma, a),
        Command::Rip(a) => (Subcommand::Rip, a),
        Command::Plot { csv, kind } => {
            let script = emit_plot_script(csv, PlotKind::parse(kind)?)?;
            return Ok(json!({ "script": script }));
        }
        Command::Replay {
            record,
            out,
            workers,
        } => {
            return Ok(serde_json::to_value(experiment::replay(
                record, out, *workers,
            )?)?);
        }
    };
    run_subcommand(sub, args)
}

fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .downcast_ref::<hwcert::Error>()
        .map(hwcert::Error::kind)
        .unwrap_or("io");
    json!({ "error": { "kind": kind, "message": format!("{err:#}") } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(value) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&value).unwrap_or_default()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_json(&err));
            let config_error = matches!(
                err.downcast_ref::<hwcert::Error>(),
                Some(hwcert::Error::Config(_))
            );
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
