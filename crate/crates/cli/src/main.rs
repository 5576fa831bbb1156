//! `propsurro`: generate synthetic tables, train and query density surrogates,
//! and run the fusion and multi-fidelity studies.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use propsurro::surrogate::ModelKind;

use crate::commands::CliError;
use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "propsurro", version, about = "Density surrogates for alkane property maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splits, optimizer restarts and training
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Model kind
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    /// Fraction of the table used for training
    #[arg(long, global = true)]
    train_frac: Option<f64>,
    /// Fraction of the training pool actually fitted
    #[arg(long, global = true)]
    subset_frac: Option<f64>,
    /// Allow queries outside the training domain
    #[arg(long, global = true)]
    pub extrapolate: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write low- and high-fidelity oracle tables
    Generate {
        /// Comma-separated carbon counts
        #[arg(long, value_delimiter = ',')]
        carbons: Vec<u32>,
    },
    /// Fit a model and score it on the held-out rows
    Train,
    /// Sweep temperature at fixed pressures
    Predict,
    /// Score a saved model against a table
    Evaluate,
    /// Coefficient-of-variation map over pressure and temperature
    Cvmap,
    /// Point-concatenation fusion study
    Fuse,
    /// NARGP and multi-fidelity generative study
    Mf,
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(kind) = common.model {
        cfg.model.kind = kind;
    }
    if let Some(f) = common.train_frac {
        cfg.split.train_fraction = f;
    }
    if let Some(f) = common.subset_frac {
        cfg.split.subset_fraction = f;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("PROPSURRO_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("PROPSURRO_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = load_config(&cli.common)?;
    let x = cli.common.extrapolate;
    match cli.command {
        Command::Generate { carbons } => commands::generate(&cfg, &carbons),
        Command::Train => commands::train(&cfg),
        Command::Predict => commands::predict(&cfg, x),
        Command::Evaluate => commands::evaluate(&cfg, x),
        Command::Cvmap => commands::cvmap(&cfg),
        Command::Fuse => commands::fuse(&cfg),
        Command::Mf => commands::mf(&cfg, cli.common.model),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let help = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return if help { ExitCode::SUCCESS } else { ExitCode::from(2) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
