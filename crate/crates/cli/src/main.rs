//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 one or more sessions (or a hard runtime step)
//! failed, 2 configuration error.

mod commands;
mod evaluate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use commands::CliError;

#[derive(Parser)]
#[command(name = "neurocurate", version, about = "Curation, segmentation routing and radiomics for brain tumor MRI sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where configuration and outputs come from. Without `--config` an empty
/// configuration writing to `--output-root` is used.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured output root.
    #[arg(long)]
    pub output_root: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SessionFilter {
    /// Only process these session ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub sessions: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify and select scans; writes one curation report per session.
    Curate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        filter: SessionFilter,
        /// Input roots (DICOM directories or manifest JSON files); override the configured ones.
        inputs: Vec<PathBuf>,
    },
    /// Run the full pipeline; completed stages are skipped on rerun.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        filter: SessionFilter,
        inputs: Vec<PathBuf>,
    },
    /// Route and segment the normalized images of existing session outputs.
    Segment {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        filter: SessionFilter,
    },
    /// Extract features for existing session outputs.
    Radiomics {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        filter: SessionFilter,
    },
    /// Compare predicted masks with refined masks.
    Evaluate(evaluate::EvaluateArgs),
    /// Print a session's provenance record.
    Inspect {
        /// Session output directory or provenance.json.
        path: PathBuf,
        /// Print only this stage entry.
        #[arg(long)]
        stage: Option<String>,
    },
    /// Write a synthetic phantom session, its truth mask and a ready-to-run configuration.
    Phantom(commands::PhantomArgs),
}

fn init_logging() {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match cli.command {
        Command::Curate { config, filter, inputs } => commands::curate(&config, &filter, &inputs),
        Command::Run { config, filter, inputs } => commands::run(&config, &filter, &inputs),
        Command::Segment { config, filter } => commands::segment(&config, &filter),
        Command::Radiomics { config, filter } => commands::radiomics(&config, &filter),
        Command::Evaluate(args) => evaluate::evaluate(&args),
        Command::Inspect { path, stage } => commands::inspect(&path, stage.as_deref()),
        Command::Phantom(args) => commands::phantom(&args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
