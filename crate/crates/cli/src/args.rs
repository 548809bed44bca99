use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qglab", version, about = "Question-generation pretraining for text generation")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 1 gives bit-for-bit reproducible runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON file with "model", "training" and "decode" sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a raw dump down to usable records and report corpus stats.
    Mine(MineArgs),
    /// Learn a BPE vocabulary from JSONL corpora.
    BuildVocab(BuildVocabArgs),
    /// Train a model to generate questions from answers.
    Pretrain(PretrainArgs),
    /// Fine-tune on summarization or answer-focused question generation.
    Finetune(FinetuneArgs),
    /// Decode outputs for every record of a JSONL file.
    Generate(GenerateArgs),
    /// Score a model or a predictions file against references.
    Evaluate(EvaluateArgs),
    /// Fine-tune on nested subsets and record held-out ROUGE-L.
    Sweep(SweepArgs),
    /// Aggregate Best-Worst Scaling judgments.
    Bws(BwsArgs),
    /// Pairwise paired permutation tests on per-item scores.
    Significance(SignificanceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MineKind {
    Qa,
    Nq,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Record kind: community QA pairs or natural-questions style examples.
    #[arg(long, value_enum, default_value_t = MineKind::Qa)]
    pub kind: MineKind,
    /// Stats JSON path [default: <out>.stats.json].
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Count subword tokens with this vocabulary instead of words.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8000)]
    pub size: usize,
}

/// Flags shared by every training subcommand. Unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    /// Architecture preset: tiny, base or large.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub max_src_len: Option<usize>,
    #[arg(long)]
    pub max_tgt_len: Option<usize>,
    /// Disable length bucketing.
    #[arg(long)]
    pub no_bucketing: bool,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Filtered question-answer pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Warm-start embeddings and shared blocks from this checkpoint.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Summarization,
    QuestionGeneration,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Starting checkpoint; omit to train from random initialization.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Vocabulary [default: vocab.json next to --ckpt].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args, Default)]
pub struct DecodeFlags {
    /// Decoding strategy.
    #[arg(long)]
    pub decoder: Option<String>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Finetuned,
    ZeroShot,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// References: summarization or question-generation records.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Summarization)]
    pub task: TaskArg,
    /// Model to decode with (ignored when --predictions is given).
    #[arg(long, required_unless_present = "predictions")]
    pub ckpt: Option<PathBuf>,
    /// Output of `generate`, one line per --data record.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Finetuned)]
    pub mode: ModeArg,
    /// Extra metrics from the registry to include, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub pretrained: PathBuf,
    /// Baseline starting point; omit for random initialization.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub train_data: PathBuf,
    #[arg(long)]
    pub heldout: PathBuf,
    /// Percentages of the training set, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0])]
    pub fractions: Vec<f64>,
    /// Raise the step budget so every subset sees at least this many epochs.
    #[arg(long, default_value_t = 0.0)]
    pub min_epochs: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct BwsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Systems expected in the study; any never judged is reported.
    #[arg(long, value_delimiter = ',')]
    pub systems: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    /// JSON object mapping each system to its per-item scores.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
}
