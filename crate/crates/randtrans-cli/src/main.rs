//! Batch experiment runner: validates configs and executes named pipelines,
//! leaving deterministic CSV artifacts plus a content-hash manifest.
//!
//! Exit codes: 0 when every enabled acceptance check passes, 1 on a pipeline
//! failure (with a machine-readable failure report in the output directory),
//! 2 on configuration or usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use randtrans::config::ExperimentConfig;
use randtrans::pipeline::{self, Pipeline};

#[derive(Parser)]
#[command(
    name = "randtrans",
    about = "Numerical laboratory for random transcendental dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named pipeline and write its artifacts.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// One of: check-conditions, julia, nevanlinna, gibbs, cones,
        /// correlations, clt, all.
        #[arg(long)]
        pipeline: String,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a config file and exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default exponential-family config to stdout.
    DefaultConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(_) => {
                println!("ok: {} is a valid experiment config", config.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(2)
            }
        },
        Command::DefaultConfig => {
            println!("{}", ExperimentConfig::default_random_exp().to_json());
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            pipeline,
            seed,
            out,
        } => {
            let Some(which) = Pipeline::parse(&pipeline) else {
                eprintln!(
                    "unknown pipeline {pipeline:?}; expected one of: {}",
                    Pipeline::NAMES.join(", ")
                );
                return ExitCode::from(2);
            };
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            match pipeline::run(&cfg, which, &out_dir) {
                Ok(report) => {
                    for outcome in &report.outcomes {
                        println!(
                            "{} {} {}",
                            if outcome.passed { "PASS" } else { "FAIL" },
                            outcome.name,
                            outcome.details
                        );
                    }
                    println!("manifest: {}", report.manifest_path.display());
                    if report.all_passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("pipeline error: {e}");
                    let failure = serde_failure(&e);
                    let _ = std::fs::create_dir_all(&out_dir);
                    let _ = std::fs::write(out_dir.join("failure.json"), failure);
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn serde_failure(e: &randtrans::Error) -> String {
    format!(
        "{{\n  \"error\": \"{}\"\n}}\n",
        format!("{e}").replace('"', "'")
    )
}
