mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "optiscout", version, about = "Find and fix performance anti-patterns in C++ code")]
pub struct Cli {
    /// Pipeline config file (TOML or JSON). `eval map` also accepts a bare
    /// retrieval config here.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Indented JSON, or a text table where one exists.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mine a git history for performance fixes into an anti-pattern database.
    Mine(MineArgs),
    /// Extract functions from C++ sources into JSON lines.
    Extract(ExtractArgs),
    /// Report costly application-specific functions of a profile.
    Prune(PruneArgs),
    /// Build or query the embedding index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Retrieve and rank candidates for a function or diff query.
    Query(QueryArgs),
    /// Score given candidates against a query.
    Rank(RankArgs),
    /// Generate edit proposals for a target with an LLM or replay fixtures.
    GenEdit(GenEditArgs),
    /// Build and test a workspace with an edit applied.
    Verify(VerifyArgs),
    /// Measure the median speedup of an edit.
    Bench(BenchArgs),
    /// Retrieval evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Record or summarize edit outcomes.
    #[command(subcommand)]
    Outcome(OutcomeCommand),
}

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Git repository to scan.
    #[arg(long)]
    pub repo: PathBuf,
    /// Keyword rules, one per line (`re:` prefix for a regex).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Curated feed of commit ids, optionally followed by a category.
    #[arg(long)]
    pub feed: Option<PathBuf>,
    /// Output database (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// File listing source paths, one per line.
    #[arg(long, conflicts_with = "root")]
    pub manifest: Option<PathBuf>,
    /// Directory to scan for C++ sources.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Prune report whose percentages are attached to functions of the same name.
    #[arg(long)]
    pub costs: Option<PathBuf>,
    /// Output records (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Folded stacks, or a call tree when the file ends in `.json`.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub cmin: Option<f64>,
    #[arg(long)]
    pub cmax: Option<f64>,
    #[arg(long)]
    pub shared_threshold: Option<u32>,
    /// JSON object mapping function names to the number of binaries containing them.
    #[arg(long)]
    pub binaries: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum IndexCommand {
    /// Embed records and write the index.
    Build(IndexBuildArgs),
    /// Nearest neighbors of a function or diff.
    Query(IndexQueryArgs),
}

#[derive(Args, Debug)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long)]
    pub nprobe: Option<usize>,
    #[arg(long)]
    pub min_cost_pct: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct QuerySource {
    /// Query by the id of a function in `--records`.
    #[arg(long = "function", conflicts_with = "diff")]
    pub function: Option<String>,
    /// Query by the before side of a unified diff.
    #[arg(long)]
    pub diff: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IndexQueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Records, needed for `--function` queries.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[command(flatten)]
    pub source: QuerySource,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub source: QuerySource,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub exact: bool,
    /// Keep ANN order instead of re-ranking.
    #[arg(long)]
    pub no_rank: bool,
    /// Number of results to print.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// A function id, or the path of a diff file.
    #[arg(long)]
    pub query: String,
    /// Comma-separated candidate ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub candidates: Vec<String>,
}

#[derive(Args, Debug)]
pub struct GenEditArgs {
    /// zero-shot, few-shot, cot or react.
    #[arg(long)]
    pub recipe: Option<String>,
    /// Source file holding the target.
    #[arg(long)]
    pub target: PathBuf,
    /// Restrict the target to the function with this qualified name.
    #[arg(long = "function")]
    pub function: Option<String>,
    /// Anti-pattern category, e.g. vector or map.
    #[arg(long, default_value = "other")]
    pub category: String,
    /// Replay fixture file or directory.
    #[arg(long, conflicts_with = "endpoint")]
    pub replay: Option<PathBuf>,
    /// HTTP completion endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Anti-pattern database for few-shot examples.
    #[arg(long)]
    pub shots: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub self_review: bool,
}

#[derive(Args, Debug)]
pub struct EditArgs {
    /// Workspace root.
    #[arg(long)]
    pub workspace: PathBuf,
    /// Path of the edited file, relative to the workspace.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// New contents of `--file`.
    #[arg(long, requires = "file", conflicts_with = "diff")]
    pub edited: Option<PathBuf>,
    /// Unified diff to apply to `--file`.
    #[arg(long, requires = "file")]
    pub diff: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    #[arg(long)]
    pub build: Option<String>,
    #[arg(long)]
    pub test: Option<String>,
    #[arg(long)]
    pub timeout: Option<u64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub edit: EditArgs,
    /// Benchmark command; prints one cycles/op number per line.
    #[arg(long)]
    pub cmd: Option<String>,
    /// Run once in each directory before benchmarking.
    #[arg(long)]
    pub build: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub timeout: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// MAP@k of BOW retrieval on the seeded corpus.
    Map(EvalMapArgs),
}

#[derive(Args, Debug)]
pub struct EvalMapArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub k: Vec<usize>,
    /// Corpus seeds, one table per seed.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    /// Emit CSV instead of JSON or a table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Subcommand, Debug)]
pub enum OutcomeCommand {
    /// Append an outcome for an edit.
    Record(OutcomeRecordArgs),
    /// Share of each status, latest entry per edit.
    Summary(OutcomeSummaryArgs),
}

#[derive(Args, Debug)]
pub struct OutcomeRecordArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    #[arg(long)]
    pub edit_id: String,
    /// S_PROD, S_USER, R_REVERT, R_TEST, R_USER, R_EMPTY or R_OTHER.
    #[arg(long)]
    pub status: String,
    #[arg(long, default_value = "")]
    pub note: String,
}

#[derive(Args, Debug)]
pub struct OutcomeSummaryArgs {
    #[arg(long)]
    pub ledger: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
