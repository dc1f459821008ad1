//! Command-line front end: record files in, feature files, evaluation and
//! correlation reports out.

pub mod commands;
pub mod config;
pub mod features;
pub mod manifest;
pub mod numfmt;
pub mod report;
pub mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{cmd_correlate, cmd_evaluate, cmd_features, Failure, Outcome};
use config::{Overrides, PipelineConfig, CONFIG_ENV};
use selftest::{run_selftest, summary, SelftestOptions};

#[derive(Debug, Parser)]
#[command(name = "seizure", version, about = "Wavelet/GGD seizure classification pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the randomized selftest checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict to one rhythm (delta, theta, alpha, beta, gamma) or `all`
    /// for the joint model.
    #[arg(long, global = true)]
    pub band: Option<String>,
    /// eq6 or pooled.
    #[arg(long, global = true)]
    pub classifier: Option<String>,
    /// median or mean.
    #[arg(long, global = true)]
    pub aggregate: Option<String>,
    /// scale or shape; the scalar paired by `correlate --reference`.
    #[arg(long, global = true)]
    pub correlate_feature: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-segment scale/shape features for each record.
    Features { inputs: Vec<PathBuf> },
    /// Leave-one-out evaluation of event-level features.
    Evaluate { inputs: Vec<PathBuf> },
    /// Pearson correlation tables from event-level features.
    Correlate {
        inputs: Vec<PathBuf>,
        /// Second feature set paired event by event with the inputs.
        #[arg(long, num_args = 1..)]
        reference: Vec<PathBuf>,
    },
    /// Estimator, wavelet, filter and statistics checks.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_taps: bool,
    },
}

fn dispatch(cli: Cli) -> Outcome {
    let c = cli.common;
    let mut config = PipelineConfig::load(c.config.as_deref()).map_err(Failure::Usage)?;
    config.apply(&Overrides {
        out: c.out,
        seed: c.seed,
        band: c.band,
        classifier: c.classifier,
        aggregate: c.aggregate,
        correlate_feature: c.correlate_feature,
    });
    let settings = config.validate().map_err(Failure::Usage)?;
    match cli.command {
        Command::Features { inputs } => cmd_features(&inputs, &config, &settings),
        Command::Evaluate { inputs } => cmd_evaluate(&inputs, &config, &settings),
        Command::Correlate { inputs, reference } => cmd_correlate(&inputs, &reference, &config, &settings),
        Command::Selftest { corrupt_taps } => {
            let checks = run_selftest(&SelftestOptions {
                seed: settings.seed,
                corrupt_taps,
            });
            print!("{}", summary(&checks));
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Processing(anyhow::anyhow!("self-test failed")))
            }
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
