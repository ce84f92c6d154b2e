//! Staged pipeline: prepare, embed, train, evaluate, predict, report.
//!
//! Each stage writes `<stage>.manifest.json` into the output directory with a
//! hash of the configuration it depends on. Downstream stages refuse to run
//! against artifacts whose hash does not match the current configuration.

pub mod config;
pub mod embed;
pub mod error;
pub mod evaluate;
pub mod hashes;
pub mod manifest;
pub mod predict;
pub mod prepare;
pub mod report;
pub mod train;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "feedbackctl", version, about = "Feedback classification experiments")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, short, global = true, default_value = "experiment.json")]
    pub config: PathBuf,
    /// Override a config value, e.g. `--set train.max_epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, clean, label and encode the corpus.
    Prepare,
    /// Train or load word vectors and project them onto the vocabulary.
    Embed,
    /// Fit the configured model on the configured split.
    Train,
    /// Score checkpoints on held-out data.
    Evaluate,
    /// Classify new feedback with the trained model.
    Predict {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `predictions.jsonl` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Feedback type and agency distributions.
    Report,
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = ExperimentConfig::load(&cli.config, &cli.overrides)?;
    match &cli.command {
        Command::Prepare => prepare::run(&cfg),
        Command::Embed => embed::run(&cfg),
        Command::Train => train::run(&cfg),
        Command::Evaluate => evaluate::run(&cfg),
        Command::Predict { input, output } => predict::run(&cfg, input, output.as_deref()),
        Command::Report => report::run(&cfg),
    }
}
