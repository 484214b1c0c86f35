//! Command-line front end: configuration, presets, file formats, reports
//! and the subcommands.

pub mod commands;
pub mod config;
pub mod io;
pub mod presets;
pub mod report;

use crate::error::{Error, Result};
use clap::{Parser, Subcommand};
use commands::Output;
use config::ExperimentConfig;
use std::io::Write;
use std::path::PathBuf;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FRACOBS_OUT";
const DEFAULT_OUT_DIR: &str = "fracobs-out";

#[derive(Debug, Parser)]
#[command(
    name = "fracobs",
    version,
    about = "Regional gradient observability of time-fractional diffusion"
)]
pub struct Args {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment; `fracobs presets` lists them.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory. Falls back to the configuration, then to the
    /// FRACOBS_OUT environment variable.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the noise seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Record wall time in the report (makes reports differ between runs).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print E_{alpha,beta}(z) as CSV.
    Mlf {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Arguments, comma separated.
        #[arg(
            long,
            required = true,
            value_delimiter = ',',
            allow_hyphen_values = true
        )]
        z: Vec<f64>,
    },
    /// Simulate sensor outputs of the configured initial state.
    Simulate,
    /// Rank test (1-D) or regional Gramian (2-D) with the G-matrices.
    Strategic,
    /// Regional Gramian and its spectrum.
    Gram,
    /// HUM reconstruction of the regional gradient.
    Reconstruct {
        /// Observation CSV; simulated from the configuration when absent.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// The zero-output example: globally unseen, regionally seen.
    Counterexample,
    /// List built-in presets.
    Presets,
}

impl Args {
    fn experiment(&self, fallback: Option<&str>) -> Result<ExperimentConfig> {
        let cfg = match (&self.config, &self.preset, fallback) {
            (Some(path), _, _) => ExperimentConfig::load(path)?,
            (None, Some(name), _) => presets::find(name)?.config(),
            (None, None, Some(name)) => presets::find(name)?.config(),
            (None, None, None) => {
                return Err(Error::Config(
                    "give --config <path> or --preset <name>".into(),
                ))
            }
        };
        Ok(match self.seed {
            Some(seed) => cfg.with_seed(seed),
            None => cfg,
        })
    }

    fn output(&self, cfg: &ExperimentConfig) -> Output {
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        Output {
            dir,
            timing: self.timing,
        }
    }
}

/// Writes to stdout; a reader that hung up early is not an error.
fn to_stdout(f: impl FnOnce(&mut std::io::StdoutLock) -> std::io::Result<()>) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match f(&mut out).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn run(args: &Args) -> Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    match &args.command {
        Command::Mlf { alpha, beta, z } => {
            let table = commands::mlf_table(&commands::cmd_mlf(*alpha, *beta, z)?);
            to_stdout(|out| write!(out, "{table}"))?;
        }
        Command::Presets => to_stdout(|out| {
            for p in presets::PRESETS {
                writeln!(out, "{:<24} {}", p.name, p.summary)?;
            }
            Ok(())
        })?,
        Command::Simulate => {
            let cfg = args.experiment(None)?;
            let s = commands::cmd_simulate(&cfg, &args.output(&cfg))?;
            log::info!("simulated {} channels on {} samples", s.channels, s.samples);
        }
        Command::Strategic => {
            let cfg = args.experiment(None)?;
            commands::cmd_strategic(&cfg, &args.output(&cfg))?;
        }
        Command::Gram => {
            let cfg = args.experiment(None)?;
            let g = commands::cmd_gram(&cfg, &args.output(&cfg))?;
            log::info!(
                "Gram eigenvalues in [{:.3e}, {:.3e}]",
                g.smallest,
                g.largest
            );
        }
        Command::Reconstruct { observations } => {
            let cfg = args.experiment(None)?;
            commands::cmd_reconstruct(&cfg, observations.as_deref(), &args.output(&cfg))?;
        }
        Command::Counterexample => {
            let cfg = args.experiment(Some("counterexample"))?;
            commands::cmd_counterexample(&cfg, &args.output(&cfg))?;
        }
    }
    Ok(())
}
