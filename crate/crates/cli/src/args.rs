use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tlens",
    version,
    about = "Predict human responses to posts and reason over them",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Output format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Seed for initialization, shuffling and dropout.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Model config JSON used by `train` (default: desk preset).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model directory holding config.json, vocab.txt and weights.hrw.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// error, warn, info, debug or trace; logs go to stderr.
    #[arg(long, default_value = "warn", global = true)]
    pub log_level: log::LevelFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a JSONL corpus and write a model directory.
    Train(TrainArgs),
    /// Spearman ρ and AUC of a trained model on a corpus.
    Eval(EvalArgs),
    /// Predict the human response to one post.
    Score(ScoreArgs),
    /// Serve the model as HR-MCP tools.
    Serve(ServeArgs),
    /// Answer a question about a post with the ReAct agent.
    Agent(AgentArgs),
    /// Signal detection, ANOVA and rank statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long)]
    pub no_shuffle: bool,
    /// Train on posts with an image only.
    #[arg(long)]
    pub multimodal_only: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub corpus: PathBuf,
    /// Also write the training loss curve found in the model directory here.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transport {
    Stdio,
    Sse,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_enum, default_value_t = Transport::Stdio)]
    pub transport: Transport,
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
    #[arg(long, default_value_t = tlens_mcp::DEFAULT_MAX_LINE_BYTES)]
    pub max_line_bytes: usize,
    /// Seconds a disconnected SSE session is kept.
    #[arg(long, default_value_t = 30)]
    pub session_timeout: u64,
}

#[derive(Debug, Args)]
pub struct AgentArgs {
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub text: String,
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Send the image inline as base64 instead of by path.
    #[arg(long)]
    pub inline_image: bool,
    /// Scripted completions (JSON list) instead of a live LLM.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub max_steps: usize,
    /// Connect to a running SSE server instead of serving --weights in process.
    #[arg(long)]
    pub mcp_url: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// d′ and c′ from outcome counts or per-trial `label,response` rows.
    Dprime(DprimeArgs),
    /// One-way ANOVA from `--group` lists or `group,value` rows.
    Anova(AnovaArgs),
    /// Spearman ρ from `--x/--y` lists or `x,y` rows.
    Spearman(PairArgs),
    /// AUC from `--x` scores and `--y` labels or `score,label` rows.
    Auc(PairArgs),
}

#[derive(Debug, Args)]
pub struct DprimeArgs {
    #[arg(long, requires_all = ["misses", "fa", "cr"], conflicts_with = "input")]
    pub hits: Option<u64>,
    #[arg(long)]
    pub misses: Option<u64>,
    #[arg(long)]
    pub fa: Option<u64>,
    #[arg(long)]
    pub cr: Option<u64>,
    #[arg(long, required_unless_present = "hits")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnovaArgs {
    /// Comma-separated values of one group; repeat per group.
    #[arg(long, conflicts_with = "input")]
    pub group: Vec<String>,
    #[arg(long, required_unless_present = "group")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long, value_delimiter = ',', requires = "y", conflicts_with = "input")]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<f64>,
    #[arg(long, required_unless_present = "x")]
    pub input: Option<PathBuf>,
}
