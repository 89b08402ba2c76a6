use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twinbeam::error::Result;
use twinbeam_cli::config::ScenarioConfig;
use twinbeam_cli::{commands, exit_code_for};

/// Simulate and analyze pulsed twin-beam intensity-difference squeezing
/// measurements with a fast balanced detector.
#[derive(Parser)]
#[command(name = "twinbeam", version, about)]
struct Cli {
    /// Scenario configuration (TOML). Defaults are used when omitted.
    #[arg(long, global = true, env = "TWINBEAM_CONFIG")]
    config: Option<PathBuf>,

    /// Override the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the worker-thread count (0 = library default).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the shot-noise calibration sweep and persist the linear fit.
    Calibrate,
    /// Sweep the amplifier gain and estimate the squeezing ratio per point.
    Measure {
        /// Calibration record produced by `calibrate`.
        #[arg(long)]
        calibration: PathBuf,
    },
    /// Analytic ratio and optimal-gain-ratio tables (no synthesis).
    Predict {
        #[arg(long, default_value_t = 2.0)]
        gain_min: f64,
        #[arg(long, default_value_t = 100.0)]
        gain_max: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Write synthesized detector records as .tbt1 files.
    SimulateTraces {
        /// Number of records (defaults to daq.records).
        #[arg(long)]
        records: Option<usize>,
    },
    /// Analyze existing .tbt1 trace files or directories containing them.
    Analyze {
        /// Trace files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Emit the data bundle underlying one of the standard figures.
    ReproduceFigure {
        /// One of: fig2b, fig2c, fig2d, fig3a, fig3c, fig4.
        #[arg(long)]
        id: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.run.master_seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.run.workers = workers;
    }
    if config.run.workers > 0 {
        // Ignore the error if a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.run.workers)
            .build_global();
    }

    match &cli.command {
        Command::Calibrate => commands::calibrate::run(&config, &cli.out_dir),
        Command::Measure { calibration } => {
            commands::measure::run(&config, calibration, &cli.out_dir)
        }
        Command::Predict {
            gain_min,
            gain_max,
            steps,
        } => commands::predict::run(&config, &cli.out_dir, *gain_min, *gain_max, *steps),
        Command::SimulateTraces { records } => {
            commands::simulate::run(&config, &cli.out_dir, *records)
        }
        Command::Analyze { inputs } => commands::analyze::run(&config, &cli.out_dir, inputs),
        Command::ReproduceFigure { id } => commands::reproduce::run(&config, &cli.out_dir, id),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error) as u8)
        }
    }
}
