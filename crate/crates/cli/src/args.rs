use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

/// Checkpoint-trajectory analytics for machine translation output.
#[derive(Debug, Parser)]
#[command(name = "mtss", version, about)]
pub struct Cli {
    /// TOML file with default values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Recorded in output metadata.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use sequential, fixed-order computation paths.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MTSS_THREADS")]
    pub threads: Option<usize>,
    /// Print results as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory against which relative output paths are resolved.
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a modified Kneser-Ney n-gram model and write it as ARPA.
    TrainLm(TrainLm),
    /// Score text under an ARPA model.
    ScoreLm(ScoreLm),
    /// Word-align a parallel corpus and write Pharaoh links.
    Align(Align),
    /// Fuzzy reordering score and Kendall tau per sentence.
    ReorderScore(ReorderScore),
    /// Corpus BLEU against a single reference.
    Bleu(Bleu),
    /// Teacher-forced token accuracy by frequency bucket.
    Accuracy(Accuracy),
    /// Share of generated tokens per frequency bucket.
    FreqProfile(FreqProfile),
    /// Metric series across checkpoints listed in a manifest.
    Trajectory(Trajectory),
    /// Locate training-stage boundaries in a trajectory table.
    DetectStages(Stages),
    /// Pick an intermediate checkpoint as distillation teacher.
    RecommendTeacher(Stages),
}

#[derive(Debug, Args)]
pub struct TrainLm {
    /// Training text, one sentence per line.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Use one fixed discount instead of estimated modified-KN discounts.
    #[arg(long, value_name = "D")]
    pub discount: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreLm {
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// One row per sentence instead of the corpus figure.
    #[arg(long)]
    pub per_sentence: bool,
    /// Report total log10 probability instead of the per-token average.
    #[arg(long)]
    pub total: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct AlignerArgs {
    /// EM iterations.
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    /// Diagonal tension.
    #[arg(long, default_value_t = 4.0)]
    pub lambda: f64,
    /// Null-alignment prior.
    #[arg(long, default_value_t = 0.08)]
    pub p0: f64,
}

#[derive(Debug, Args)]
pub struct Align {
    #[arg(long, value_name = "FILE")]
    pub src: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tgt: Option<PathBuf>,
    #[command(flatten)]
    pub aligner: AlignerArgs,
    /// Pharaoh output (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the translation table as TSV.
    #[arg(long, value_name = "FILE")]
    pub dump_model: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct Thresholds {
    /// Fewest aligned source tokens for an FRS value.
    #[arg(long, default_value_t = 2)]
    pub min_frs_len: usize,
    /// Fewest aligned source tokens for a Kendall value.
    #[arg(long, default_value_t = 10)]
    pub min_kendall_len: usize,
}

#[derive(Debug, Args)]
pub struct ReorderScore {
    #[arg(long, value_name = "FILE")]
    pub alignments: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub src: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tgt: Option<PathBuf>,
    #[command(flatten)]
    pub thresholds: Thresholds,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Bleu {
    #[arg(long, value_name = "FILE")]
    pub hyp: Option<PathBuf>,
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
}

#[derive(Debug, Args, Clone)]
pub struct Buckets {
    /// Inclusive upper rank bounds of the frequency buckets.
    #[arg(long, value_delimiter = ',', default_value = "10,50,500,5000")]
    pub buckets: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct Accuracy {
    /// JSON Lines with `ref` and `top1` token arrays.
    #[arg(long, value_name = "FILE")]
    pub pred: Option<PathBuf>,
    /// Training targets defining frequency ranks.
    #[arg(long, value_name = "FILE")]
    pub vocab_from: Option<PathBuf>,
    #[command(flatten)]
    pub buckets: Buckets,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FreqProfile {
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub vocab_from: Option<PathBuf>,
    #[command(flatten)]
    pub buckets: Buckets,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Trajectory {
    /// TSV of `step<TAB>translations[<TAB>predictions]`.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// References, line-parallel with each checkpoint's translations.
    #[arg(long, value_name = "FILE")]
    pub refs: Option<PathBuf>,
    /// Training targets for the language models and frequency ranks.
    #[arg(long, value_name = "FILE")]
    pub train_tgt: Option<PathBuf>,
    /// Source side of the translated lines, used for alignment.
    #[arg(long, value_name = "FILE")]
    pub heldout_src: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub lm_orders: Vec<usize>,
    /// Train one aligner on all checkpoints instead of one per checkpoint.
    #[arg(long)]
    pub shared_aligner: bool,
    #[command(flatten)]
    pub aligner: AlignerArgs,
    #[command(flatten)]
    pub thresholds: Thresholds,
    #[command(flatten)]
    pub buckets: Buckets,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// SVG line charts of every series.
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Stages {
    /// Trajectory CSV written by `trajectory`.
    #[arg(long, value_name = "FILE")]
    pub trajectory: Option<PathBuf>,
    /// BLEU band below the best checkpoint.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
