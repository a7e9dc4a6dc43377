//! `sasv`: synthesize data, train back-ends, evaluate and report EERs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "sasv",
    version,
    about = "Spoofing-aware speaker verification back-ends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a back-end and write model.ckpt and train_log.tsv.
    Train(Flags),
    /// Score a trial list and write scores, report and histogram.
    Evaluate(Flags),
    /// Generate a synthetic dataset.
    Synth(Flags),
    /// Compute the report for an existing score file.
    Report(Flags),
}

/// Flags override values from `--config`.
#[derive(clap::Args)]
struct Flags {
    /// TOML file of `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// msfm, msfm-no-sssv, iep, baseline1 or baseline2.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    asv_store: Option<PathBuf>,
    #[arg(long)]
    cm_store: Option<PathBuf>,
    /// Countermeasure score per utterance.
    #[arg(long)]
    cm_scores: Option<PathBuf>,
    /// CM protocol listing the training utterances.
    #[arg(long)]
    protocol: Option<PathBuf>,
    #[arg(long)]
    trials: Option<PathBuf>,
    #[arg(long)]
    enrollment: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Score file for `report`.
    #[arg(long)]
    scores: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path).map_err(Failure::Usage)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = self.out {
            cfg.out = out;
        }
        if self.model.is_some() {
            cfg.model = self.model;
        }
        let paths = [
            (self.asv_store, &mut cfg.asv_store),
            (self.cm_store, &mut cfg.cm_store),
            (self.cm_scores, &mut cfg.cm_scores),
            (self.protocol, &mut cfg.protocol),
            (self.trials, &mut cfg.trials),
            (self.enrollment, &mut cfg.enrollment),
            (self.checkpoint, &mut cfg.checkpoint),
            (self.scores, &mut cfg.scores),
        ];
        for (flag, slot) in paths {
            if flag.is_some() {
                *slot = flag;
            }
        }
        cfg.model_kind().map_err(Failure::Usage)?;
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(f) => commands::train(&f.resolve()?),
        Command::Evaluate(f) => commands::evaluate(&f.resolve()?),
        Command::Synth(f) => commands::synth(&f.resolve()?),
        Command::Report(f) => commands::report(&f.resolve()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SASV_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
