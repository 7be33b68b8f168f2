use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "audit", version, about = "Consistency audit of repeated model runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Agreement metrics for a label matrix.
    Categorical(CategoricalArgs),
    /// Consistency metrics for a value matrix.
    Continuous(ContinuousArgs),
    /// Embedding similarity, or lexicon tone agreement when word lists are given.
    Textsim(TextsimArgs),
    /// Aggregation curve over synthetic runs of k sampled runs.
    Aggregate(AggregateArgs),
    /// Weighted-F1 accuracy of aggregated runs against truth labels.
    Accuracy(AccuracyArgs),
    /// Model consistency against human annotator agreement.
    Human(HumanArgs),
    /// Downstream-inference Monte Carlo study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Long-format run file (CSV or JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with task settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CategoricalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Label scheme JSON.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct ContinuousArgs {
    #[command(flatten)]
    pub common: Common,
    /// Unit label carried into the report.
    #[arg(long, default_value = "value")]
    pub unit: String,
}

#[derive(Debug, Args)]
pub struct TextsimArgs {
    #[command(flatten)]
    pub common: Common,
    /// Positive word list, one word per line.
    #[arg(long, requires = "lexicon_neg")]
    pub lexicon_pos: Option<PathBuf>,
    /// Negative word list, one word per line.
    #[arg(long, requires = "lexicon_pos")]
    pub lexicon_neg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Label scheme JSON; without it the input is read as values.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only documents on which the observed runs disagree.
    #[arg(long)]
    pub restrict_disagreement: bool,
}

#[derive(Debug, Args)]
pub struct AccuracyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub schema: PathBuf,
    /// Truth labels, CSV `doc_id,label` or JSONL.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restrict_disagreement: bool,
}

#[derive(Debug, Args)]
pub struct HumanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub schema: PathBuf,
    /// CSV `doc_id,human_agreement_pct,human_majority_label`.
    #[arg(long)]
    pub human: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV `doc_id,source_length`; run values are divided by the source length.
    #[arg(long)]
    pub source_lengths: Option<PathBuf>,
}
