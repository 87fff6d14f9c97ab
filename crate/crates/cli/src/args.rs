use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use tokensyn::{DEFAULT_NUM_SAMPLES, DEFAULT_TAU, DEFAULT_WINDOW};

#[derive(Debug, Parser)]
#[command(name = "tokensyn", version, about = "Structure tokens, synonym dictionaries and perturbation ensembles")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Never changes output.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; data goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ChainArgs {
    /// Chain to read from structure files (default: first chain with Cα atoms).
    #[arg(long)]
    pub chain: Option<char>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a k-means codebook on descriptors of the given structures.
    TrainCodebook {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        codes: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Write the synonym dictionary of a codebook.
    Synonyms {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Redundancy statistics, plus projection and distance tables for plotting.
    Stats {
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Directory for projection.csv and distances.csv.
        #[arg(long, default_value = ".")]
        plots_dir: PathBuf,
    },
    /// Structures to a token file, one line per conformation.
    Encode {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Token file to a multi-model structure file.
    Decode {
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        /// Accept tokens bound to a different codebook id (externally produced tokens).
        #[arg(long)]
        ignore_codebook_id: bool,
    },
    /// Synonym-swap every sequence of a token file.
    Perturb {
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        swap_prob: f64,
        /// Perturbed copies per input sequence.
        #[arg(long, default_value_t = 1)]
        num_samples: usize,
        #[arg(long)]
        ignore_codebook_id: bool,
    },
    /// One-shot pipeline: encode, swap, decode N times.
    Ensemble {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_NUM_SAMPLES)]
        num_samples: usize,
        #[arg(long, default_value_t = 1.0)]
        swap_prob: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Compare a generated ensemble with a reference ensemble.
    Evaluate {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Target name written in the report (default: reference file stem).
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = tokensyn::metrics::DEFAULT_PCA_COMPONENTS)]
        n_components: usize,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Aggregate per-target report tables into corpus medians and correlations.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Per-residue RMSF table (default: `<out>.rmsf.csv` when --out is set).
        #[arg(long)]
        rmsf: Option<PathBuf>,
    },
    /// Structural change under one full synonym swap, per input structure.
    Validate {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[command(flatten)]
        chain: ChainArgs,
    },
}
