//! `sgpuq`: simulation, sensitivity analysis and Bayesian calibration of a
//! 1D strain gradient plasticity model of micro-pillar compression.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, SensitivityModel, Target};
use error::CliError;

#[derive(Parser)]
#[command(name = "sgpuq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML). Defaults are used when omitted.
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of parallel solves.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory override.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one compression test and write the curve and εᵖ profile.
    Simulate(Common),
    /// Generate a synthetic replicate dataset from the configured truth.
    GenData(Common),
    /// Total-effect Sobol indices of the strain energy over pillar sizes.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Analyse a closed-form test model instead of the SGP model.
        #[arg(long, value_enum)]
        test_model: Option<SensitivityModel>,
        /// Base sample size override.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Sample the parameter posterior and write samples and a summary.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Sample the built-in Gaussian target instead of the model posterior.
        #[arg(long)]
        gaussian_target: bool,
        /// Summarise an existing samples file instead of sampling.
        #[arg(long)]
        resume_from: Option<PathBuf>,
    },
    /// Propagate posterior samples to every case size and report errors.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Posterior samples file.
        #[arg(long)]
        posterior: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(common) => commands::simulate(&load(&common)?),
        Command::GenData(common) => commands::gen_data(&load(&common)?),
        Command::Sensitivity { common, test_model, n } => {
            let mut cfg = load(&common)?;
            if let Some(m) = test_model {
                cfg.sensitivity.model = m;
            }
            if let Some(n) = n {
                cfg.sensitivity.n = n;
            }
            cfg.validate()?;
            commands::sensitivity(&cfg)
        }
        Command::Calibrate {
            common,
            gaussian_target,
            resume_from,
        } => {
            let mut cfg = load(&common)?;
            if gaussian_target {
                cfg.inference.target = Target::Gaussian;
            }
            if resume_from.is_some() {
                cfg.inference.resume_from = resume_from;
            }
            commands::calibrate(&cfg)
        }
        Command::Predict { common, posterior } => {
            let mut cfg = load(&common)?;
            if posterior.is_some() {
                cfg.predict.posterior = posterior;
            }
            commands::predict(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
