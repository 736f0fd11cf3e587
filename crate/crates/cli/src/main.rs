use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use batch_auction::model::bids_to_json;
use batch_auction_cli::config::{Common, Defaults, FileConfig};
use batch_auction_cli::experiment::{cmd_ratio_sweep, cmd_run, cmd_sweep_theta, ExperimentError};
use batch_auction_cli::output::render;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "batch-auction",
    version,
    about = "Batch posted-price auction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch auction against FCFS, one row per repetition.
    Run(Common),
    /// Welfare and winners across batch lengths on a fixed workload.
    SweepTheta {
        #[command(flatten)]
        common: Common,
        /// Batch lengths to try (default 1..=12).
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<u32>,
    },
    /// Empirical competitive ratio of small instances across D/F values.
    RatioSweep {
        #[command(flatten)]
        common: Common,
        /// D/F values to try (default 1,2,4,8,16).
        #[arg(long, value_delimiter = ',')]
        df_ratios: Vec<f64>,
    },
    /// Write the first repetition's workload as bid JSON.
    Generate(Common),
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Self {
            code: e.exit_code() as u8,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

fn load(common: Common) -> Result<(Common, FileConfig), Failure> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    Ok((common.merged_with(file.common.clone()), file))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let (common, _) = load(common)?;
            let spec = common.into_spec(&Defaults::reference())?;
            let (rows, events) = cmd_run(&spec)?;
            if let Some(path) = &common.events {
                std::fs::write(path, events)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let format = common.format.unwrap_or_default();
            emit(common.out.as_deref(), &render("run", &rows, format)?)?;
        }
        Command::SweepTheta { common, thetas } => {
            let (common, file) = load(common)?;
            let spec = common.into_spec(&Defaults::reference())?;
            let thetas = if !thetas.is_empty() {
                thetas
            } else {
                file.thetas.unwrap_or_else(|| (1..=12).collect())
            };
            let rows = cmd_sweep_theta(&spec, &thetas)?;
            let format = common.format.unwrap_or_default();
            emit(
                common.out.as_deref(),
                &render("sweep-theta", &rows, format)?,
            )?;
        }
        Command::RatioSweep { common, df_ratios } => {
            let (common, file) = load(common)?;
            let spec = common.into_spec(&Defaults::oracle_sized())?;
            let df_ratios = if !df_ratios.is_empty() {
                df_ratios
            } else {
                file.df_ratios
                    .unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0])
            };
            let rows = cmd_ratio_sweep(&spec, &df_ratios)?;
            let format = common.format.unwrap_or_default();
            emit(
                common.out.as_deref(),
                &render("ratio-sweep", &rows, format)?,
            )?;
            if let Some(row) = rows.iter().find(|r| r.error.is_some()) {
                return Err(Failure {
                    code: 3,
                    error: anyhow::anyhow!(
                        "D/F {}: {}",
                        row.df_ratio,
                        row.error.as_deref().unwrap_or_default()
                    ),
                });
            }
        }
        Command::Generate(common) => {
            let (common, _) = load(common)?;
            let spec = common.into_spec(&Defaults::reference())?;
            let bids = spec.workload(0)?;
            let mut text = bids_to_json(&bids);
            text.push('\n');
            emit(common.out.as_deref(), text.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
