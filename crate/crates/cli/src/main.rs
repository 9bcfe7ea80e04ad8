#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Profile;

#[derive(Parser, Debug)]
#[command(name = "fsearch", version, about = "Structural + semantic formula search")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Profile whose defaults the config file is merged over.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Override a config value, e.g. `--set train.epochs=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads; 1 is the deterministic reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a corpus TSV and store its operator graphs.
    Ingest(IngestArgs),
    /// Contrastive training over a store.
    Train(TrainArgs),
    /// Structural (and optionally semantic) vectors for every stored formula.
    Embed(EmbedArgs),
    /// Two-stage search for each topic; writes a run file.
    Search(SearchArgs),
    /// Primed metrics of a run against qrels.
    Evaluate(EvaluateArgs),
    /// Reciprocal rank fusion of two or more runs.
    Fuse(FuseArgs),
    /// Inspect the resolved configuration.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Write a deterministic synthetic corpus, topics, qrels and visual map.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Checkpoint path, rewritten after every epoch.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines training log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Structural vector file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `fallback`, `none`, or `import:<file>`; defaults to the config mode.
    #[arg(long)]
    pub semantic: Option<String>,
    /// Semantic vector file to write.
    #[arg(long)]
    pub semantic_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub structural: Option<PathBuf>,
    /// Semantic vectors of the corpus.
    #[arg(long)]
    pub semantic_vectors: Option<PathBuf>,
    /// Semantic vectors of the topics (import mode).
    #[arg(long)]
    pub query_vectors: Option<PathBuf>,
    #[arg(long)]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "fsearch")]
    pub tag: String,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub visual_map: Option<PathBuf>,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub print_json: bool,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    #[arg(required = true, num_args = 2..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub k_rrf: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value = "rrf")]
    pub tag: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum ConfigAction {
    /// Resolve and validate; print the effective TOML.
    Validate,
    /// Validate and print the pipeline plan without touching data.
    DryRun,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub formulas: usize,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// Exit 2: bad invocation or configuration. Exit 1: bad or missing data.
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
