//! Command-line surface: one subcommand per pipeline stage, flags mirroring
//! the run-configuration fields. Every argument struct serializes into the
//! run manifest so an invocation can be reproduced from its manifest alone.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use skillink_core::KbFormat;

#[derive(Debug, Parser)]
#[command(
    name = "skillink",
    version,
    about = "Span-level skill linking against a closed taxonomy knowledge base"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Knowledge-base inspection
    #[command(subcommand)]
    Kb(KbCommand),
    /// Synthesize mention records by aligning sentences to target titles
    Align(AlignArgs),
    /// Count instances, distinct gold titles, and UNK records in a split
    Stats(StatsArgs),
    /// Train the dense retrieval encoder and write its checkpoint
    TrainBiencoder(TrainArgs),
    /// Fit the generative next-token model and write its checkpoint
    FitGenmodel(FitArgs),
    /// Rank KB entities for every mention record in a split
    Link(LinkArgs),
    /// Score a ranking file against gold labels
    Evaluate(EvaluateArgs),
    /// Train and evaluate once per documented seed, then aggregate
    SeedSweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// Load the knowledge base and check its invariants
    Validate(KbValidateArgs),
}

/// Knowledge-base location shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct KbArgs {
    /// Knowledge-base file (TSV rows or JSONL objects)
    #[arg(long = "kb")]
    pub kb: PathBuf,
    /// KB file format; inferred from the extension when omitted
    #[arg(long = "kb-format", value_enum)]
    pub kb_format: Option<KbFileFormat>,
}

impl KbArgs {
    /// Explicit format, or `.jsonl`/`.json` → JSONL and anything else → TSV.
    pub fn format(&self) -> KbFormat {
        match self.kb_format {
            Some(KbFileFormat::Tsv) => KbFormat::Tsv,
            Some(KbFileFormat::Jsonl) => KbFormat::Jsonl,
            None => match self.kb.extension().and_then(|e| e.to_str()) {
                Some("jsonl") | Some("json") => KbFormat::Jsonl,
                _ => KbFormat::Tsv,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KbFileFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args, Serialize)]
pub struct KbValidateArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Optional JSON summary file; stdout only when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Manifest path (default: <output>.manifest.json when --output is set)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// JSONL input, one {"sentence", "target_title"} object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Mention-record JSONL output
    #[arg(long)]
    pub output: PathBuf,
    /// Minimum cosine similarity a span must strictly exceed to count as a
    /// match; anything at or below it becomes a gold-UNK record
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Fraction of candidate n-grams kept by the edit-distance pre-filter
    #[arg(long = "keep-fraction", default_value_t = 0.8)]
    pub keep_fraction: f64,
    /// Manifest path (default: <output>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Mention-record JSONL split to describe
    #[arg(long)]
    pub input: PathBuf,
    /// Optional JSON output file; stdout only when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Manifest path (default: <output>.manifest.json when --output is set)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Training mention-record JSONL
    #[arg(long)]
    pub input: PathBuf,
    /// Optional dev split used for best-epoch selection
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Encoder checkpoint output path
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long = "batch-size", default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    #[arg(long = "warmup-fraction", default_value_t = 0.05)]
    pub warmup_fraction: f64,
    #[arg(long, default_value_t = 276_800)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub dimension: usize,
    /// Hard negatives mined per record before training; 0 disables mining
    #[arg(long = "hard-negatives", default_value_t = 10)]
    pub hard_negatives: usize,
    /// Manifest path (default: <model>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Training mention-record JSONL
    #[arg(long)]
    pub input: PathBuf,
    /// Token-model checkpoint output path
    #[arg(long)]
    pub model: PathBuf,
    /// Additive smoothing over the title-token universe
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Mixing weight between bigram statistics and mention-token affinity
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Manifest path (default: <model>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Biencoder,
    Generative,
    Tfidf,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePool {
    /// Rank against every KB entity
    FullKb,
    /// Rank against the distinct gold ids of the input split (random only)
    GoldPool,
}

#[derive(Debug, Args, Serialize)]
pub struct LinkArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Mention-record JSONL to link
    #[arg(long)]
    pub input: PathBuf,
    /// Ranking JSONL output, one {"record_index", "candidates"} line per record
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub engine: Engine,
    /// Checkpoint path (required for biencoder and generative engines)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Candidates to emit per record
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    /// Beam width for the generative engine (default: k)
    #[arg(long = "beam-width")]
    pub beam_width: Option<usize>,
    /// Seed for the random engine; record i is drawn with seed + i
    #[arg(long, default_value_t = 276_800)]
    pub seed: u64,
    #[arg(long = "candidate-pool", value_enum, default_value_t = CandidatePool::FullKb)]
    pub candidate_pool: CandidatePool,
    /// Manifest path (default: <output>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    All,
    UnkOnly,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Gold mention-record JSONL the rankings were produced from
    #[arg(long)]
    pub input: PathBuf,
    /// Ranking JSONL produced by `link`
    #[arg(long)]
    pub rankings: PathBuf,
    /// Optional JSON report output; the text table always goes to stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Restrict scoring to records whose gold label is the UNK sentinel
    #[arg(long, value_enum, default_value_t = Subset::All)]
    pub subset: Subset,
    /// Ascending cutoffs for Accuracy@k
    #[arg(long = "k-grid", value_delimiter = ',', default_values_t = vec![1, 4, 8, 16, 32])]
    pub k_grid: Vec<usize>,
    /// Manifest path (default: <output>.manifest.json when --output is set)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepEngine {
    Biencoder,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Training mention-record JSONL
    #[arg(long)]
    pub input: PathBuf,
    /// Optional dev split used for best-epoch selection
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Evaluation mention-record JSONL scored after each run
    #[arg(long = "eval")]
    pub eval: PathBuf,
    /// Aggregated JSON report output
    #[arg(long)]
    pub output: PathBuf,
    /// Only the trained retrieval engine varies meaningfully across seeds
    #[arg(long, value_enum, default_value_t = SweepEngine::Biencoder)]
    pub engine: SweepEngine,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long = "batch-size", default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    #[arg(long = "warmup-fraction", default_value_t = 0.05)]
    pub warmup_fraction: f64,
    #[arg(long, default_value_t = 256)]
    pub dimension: usize,
    #[arg(long = "hard-negatives", default_value_t = 10)]
    pub hard_negatives: usize,
    /// Ascending cutoffs for Accuracy@k
    #[arg(long = "k-grid", value_delimiter = ',', default_values_t = vec![1, 4, 8, 16, 32])]
    pub k_grid: Vec<usize>,
    /// Manifest path (default: <output>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Reject unsorted, duplicated, or empty Accuracy@k grids.
pub fn validate_k_grid(k_grid: &[usize]) -> Result<(), String> {
    if k_grid.is_empty() {
        return Err("--k-grid needs at least one cutoff".to_string());
    }
    if k_grid[0] == 0 {
        return Err("--k-grid cutoffs must be >= 1".to_string());
    }
    for pair in k_grid.windows(2) {
        if pair[0] >= pair[1] {
            return Err(format!(
                "--k-grid must be strictly ascending, found {} before {}",
                pair[0], pair[1]
            ));
        }
    }
    Ok(())
}
