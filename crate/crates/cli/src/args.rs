//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use x2static::{Dtype, Mode, Scope};

#[derive(Parser, Debug)]
#[command(name = "x2static", version, about = "Distill static word embeddings from contextual teacher vectors")]
pub struct Cli {
    /// TOML file with [trainer], [vocab] and [preprocess] tables; flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lowercase, tokenize and filter raw paragraphs into the corpus format
    Preprocess(PreprocessArgs),
    /// Count words of a preprocessed corpus into a vocabulary file
    Vocab(VocabArgs),
    /// Write a Zipf-distributed synthetic corpus over w00000, w00001, ...
    Synth(SynthArgs),
    /// Run the deterministic mock teacher over a corpus and write a record stream
    MockTeacher(MockTeacherArgs),
    /// Train distilled (or static baseline) embeddings
    Train(TrainArgs),
    /// Average teacher vectors per word
    Ase(AseArgs),
    /// Score embeddings against word-similarity datasets
    EvalSim(EvalSimArgs),
    /// Print nearest neighbours of query words
    Nn(NnArgs),
    /// Train and evaluate both methods on growing stream prefixes
    Sweep(SweepArgs),
    /// Re-run the command recorded in a run manifest
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Raw text, paragraphs separated by blank lines
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Minimum sentences per kept paragraph [default: 3]
    #[arg(long)]
    pub min_sentences: Option<usize>,
    /// Minimum characters per kept paragraph [default: 140]
    #[arg(long)]
    pub min_chars: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    /// Preprocessed corpus
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// [default: 10]
    #[arg(long)]
    pub min_count: Option<u64>,
    /// [default: 750000]
    #[arg(long)]
    pub max_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub words: usize,
    #[arg(long, default_value_t = 200_000)]
    pub sentences: usize,
    #[arg(long, default_value_t = 1.0)]
    pub zipf: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TeacherKind {
    Hash,
    Planted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Sentence,
    Paragraph,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Sentence => Scope::Sentence,
            ScopeArg::Paragraph => Scope::Paragraph,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    F16,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F16 => Dtype::F16,
        }
    }
}

#[derive(Args, Debug)]
pub struct MockTeacherArgs {
    /// Preprocessed corpus
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub vocab: PathBuf,
    /// Record stream to write
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = TeacherKind::Hash)]
    pub teacher: TeacherKind,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScopeArg::Sentence)]
    pub scope: ScopeArg,
    #[arg(long, value_enum, default_value_t = DtypeArg::F32)]
    pub dtype: DtypeArg,
    /// Per-occurrence noise norm (planted teacher)
    #[arg(long, default_value_t = 0.0)]
    pub noise: f32,
    /// Write a gold similarity dataset scored by planted cosine (planted teacher)
    #[arg(long, value_name = "PATH")]
    pub gold: Option<PathBuf>,
    /// Pairs in the gold dataset
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
}

/// Trainer hyperparameters; unset flags fall back to the config file, then
/// to the built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct TrainerFlags {
    /// [default: 1]
    #[arg(long)]
    pub epochs: Option<u32>,
    /// [default: 10]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// [default: 5e-6]
    #[arg(long)]
    pub subsample_t: Option<f64>,
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 128]
    #[arg(long)]
    pub batch: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Embedding width; required for the static baseline
    #[arg(long)]
    pub dim: Option<usize>,
    /// More than one thread trains without synchronization and is not reproducible [default: 1]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Teacher,
    Static,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Teacher => Mode::Teacher,
            ModeArg::Static => Mode::StaticBaseline,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Teacher record stream (teacher mode)
    #[arg(long, value_name = "PATH")]
    pub stream: Option<PathBuf>,
    /// Preprocessed corpus (static mode)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub vocab: PathBuf,
    /// Embeddings in word2vec text format
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Also write the target matrix as a binary checkpoint
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// [default: teacher]
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    pub trainer: TrainerFlags,
}

#[derive(Args, Debug)]
pub struct AseArgs {
    #[arg(long, value_name = "PATH")]
    pub stream: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub vocab: PathBuf,
    /// Embeddings in word2vec text format; unseen words are omitted
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Per-word occurrence counts as TSV
    #[arg(long, value_name = "PATH")]
    pub coverage: Option<PathBuf>,
    /// Pool at most this many occurrences per word
    #[arg(long)]
    pub cap: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvalSimArgs {
    /// Embeddings in word2vec text format
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Similarity dataset; repeat for several
    #[arg(long, value_name = "PATH", required = true)]
    pub dataset: Vec<PathBuf>,
    /// Report TSV; stdout if absent
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NnArgs {
    /// Embeddings in word2vec text format
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(required = true, value_name = "WORD")]
    pub queries: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    pub stream: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub vocab: PathBuf,
    /// Similarity dataset; repeat for several
    #[arg(long, value_name = "PATH", required = true)]
    pub dataset: Vec<PathBuf>,
    /// Ascending prefix fractions in (0, 1]
    #[arg(long, value_delimiter = ',', required = true)]
    pub fractions: Vec<f64>,
    /// Sweep TSV; stdout if absent
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Pool at most this many occurrences per word for ASE
    #[arg(long)]
    pub cap: Option<u64>,
    #[command(flatten)]
    pub trainer: TrainerFlags,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Run manifest written next to an artifact
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
}
