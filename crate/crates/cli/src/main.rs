//! `statfem-lab`: run the convergence experiments from declarative
//! configs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use statfem_core::experiment::{run_experiment, ExperimentConfig};
use statfem_core::Error;

#[derive(Parser)]
#[command(
    name = "statfem-lab",
    about = "Gaussian-process finite element priors, posteriors and their Wasserstein-2 convergence experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write distances.csv, rates.csv and
    /// run_manifest.txt to the output directory.
    Run {
        /// Flat key-value config file (optional when --experiment is given).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment name; overrides the config file.
        /// One of: prior-1d, posterior-1d, prior-2d, posterior-2d,
        /// max-prior-1d, max-posterior-1d.
        #[arg(long)]
        experiment: Option<String>,
        /// RNG seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(
    config: Option<&PathBuf>,
    experiment: Option<&str>,
    seed: Option<u64>,
    out: Option<&PathBuf>,
) -> Result<ExperimentConfig, Error> {
    let text = match config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?),
        None => None,
    };
    ExperimentConfig::from_sources(text.as_deref(), experiment, seed, out.map(|p| p.as_path()))
}

fn main() -> ExitCode {
    // STATFEM_THREADS caps the BLAS/LAPACK pool, the only parallelism in the
    // pipeline. Must be set before the first BLAS call.
    if let Ok(threads) = std::env::var("STATFEM_THREADS") {
        if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
            std::env::set_var("OPENBLAS_NUM_THREADS", threads);
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            experiment,
            seed,
            out,
        } => {
            let cfg = match load_config(config.as_ref(), experiment.as_deref(), seed, out.as_ref())
            {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("statfem-lab: {e}");
                    return ExitCode::from(2);
                }
            };
            match run_experiment(&cfg) {
                Ok(report) => {
                    for rate in &report.rates {
                        let eps = rate
                            .epsilon
                            .map(|e| format!(" epsilon={e:e}"))
                            .unwrap_or_default();
                        let smoothed = rate
                            .report
                            .final_smoothed_lr()
                            .map(|v| format!(" final_smoothed_lr={v:.4}"))
                            .unwrap_or_default();
                        println!(
                            "{}{eps}: slope={:.4} intercept={:.4}{smoothed}",
                            cfg.experiment, rate.report.slope, rate.report.intercept
                        );
                    }
                    println!("wrote {}", cfg.output_dir.join("distances.csv").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("statfem-lab: {e}");
                    ExitCode::from(if e.is_config() { 2 } else { 3 })
                }
            }
        }
        Command::Validate { config } => match load_config(Some(&config), None, None, None) {
            Ok(cfg) => {
                println!("config ok: experiment {}", cfg.experiment);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("statfem-lab: {e}");
                ExitCode::from(2)
            }
        },
    }
}
