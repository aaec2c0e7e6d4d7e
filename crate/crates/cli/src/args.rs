use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use fairify_core::llm::{BackendKind, PromptSetting};
use fairify_core::record::Provenance;
use fairify_core::stats::{Measure, TestKind};

#[derive(Debug, Parser)]
#[command(name = "fairify", version, about = "Sample, correct, evaluate and report on biomedical metadata records")]
pub struct Cli {
    /// TOML configuration file (flags override it; it overrides FAIRIFY_* variables).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for all outputs of this run.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a reproducible random sample of records from a corpus.
    Sample(SampleArgs),
    /// Correct every record of a corpus with a completion backend.
    Correct(CorrectArgs),
    /// Score a corpus against the data dictionary, template and ontologies.
    Evaluate(EvaluateArgs),
    /// t-test between two evaluation reports or two settings of a reviewer score file.
    Stats(StatsArgs),
    /// Pairwise Kendall agreement between reviewers.
    Agree(AgreeArgs),
    /// Render a Markdown summary from evaluation, agreement and stats outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct OntologyArgs {
    /// Bind a field to an ontology file; repeatable.
    #[arg(long = "ontology", value_name = "FIELD=ONTOLOGY_ID:PATH")]
    pub ontologies: Vec<String>,

    /// Match primary labels only, ignoring synonyms.
    #[arg(long)]
    pub no_synonyms: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_name = "JSONL")]
    pub corpus: PathBuf,

    /// Number of records to draw.
    #[arg(short, long)]
    pub n: Option<usize>,

    /// Mersenne Twister seed.
    #[arg(long)]
    pub seed: Option<u32>,

    /// Keep only records mentioning this text (case-insensitive) before sampling.
    #[arg(long)]
    pub filter: Option<String>,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[arg(long, value_name = "JSONL")]
    pub corpus: PathBuf,

    #[arg(long)]
    pub setting: PromptSetting,

    #[arg(long, value_name = "JSON")]
    pub template: Option<PathBuf>,

    /// http | replay | surrogate_echo | surrogate_template_fill
    #[arg(long)]
    pub backend: Option<BackendKind>,

    /// Chat-completions URL (http backend).
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,

    /// Name of the environment variable holding the API key.
    #[arg(long, value_name = "VAR")]
    pub api_key_env: Option<String>,

    #[arg(long)]
    pub model: Option<String>,

    #[arg(long)]
    pub temperature: Option<f64>,

    #[arg(long)]
    pub timeout_secs: Option<u64>,

    #[arg(long)]
    pub max_retries: Option<u32>,

    #[arg(long)]
    pub backoff_ms: Option<u64>,

    #[arg(long)]
    pub max_in_flight: Option<usize>,

    /// Cassette to replay from or record into.
    #[arg(long, value_name = "JSON")]
    pub cassette: Option<PathBuf>,

    /// Do not record live traffic.
    #[arg(long)]
    pub no_record: bool,

    /// Extra field-name aliases for the template-fill surrogate (JSON object).
    #[arg(long, value_name = "JSON")]
    pub aliases: Option<PathBuf>,

    #[command(flatten)]
    pub ontology: OntologyArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "JSONL")]
    pub corpus: PathBuf,

    #[arg(long, value_name = "TXT")]
    pub dictionary: Option<PathBuf>,

    #[arg(long, value_name = "JSON")]
    pub template: Option<PathBuf>,

    /// Treat the missing-value token as an error on required fields.
    #[arg(long)]
    pub strict_required: bool,

    /// Report label; defaults to the corpus file stem.
    #[arg(long)]
    pub label: Option<String>,

    #[command(flatten)]
    pub ontology: OntologyArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// First evaluation report (JSON).
    #[arg(long, value_name = "JSON", requires = "report_b", conflicts_with = "scores")]
    pub report_a: Option<PathBuf>,

    /// Second evaluation report (JSON).
    #[arg(long, value_name = "JSON", requires = "report_a")]
    pub report_b: Option<PathBuf>,

    /// Reviewer score CSV; compares per-record means over reviewers.
    #[arg(long, value_name = "CSV")]
    pub scores: Option<PathBuf>,

    #[arg(long, default_value = "original")]
    pub setting_a: Provenance,

    #[arg(long, default_value = "llm_cedar")]
    pub setting_b: Provenance,

    #[arg(long, default_value = "accuracy")]
    pub metric: Measure,

    #[arg(long, default_value = "welch_t")]
    pub kind: TestKind,

    /// Output file stem.
    #[arg(long, default_value = "stats")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    #[arg(long, value_name = "CSV")]
    pub scores: PathBuf,

    /// Only this measure; both when omitted.
    #[arg(long)]
    pub metric: Option<Measure>,

    #[arg(long, default_value = "tau_b", value_parser = ["tau_b", "tau_a"])]
    pub variant: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "JSON")]
    pub original: Option<PathBuf>,

    #[arg(long, value_name = "JSON")]
    pub llm: Option<PathBuf>,

    #[arg(long, value_name = "JSON")]
    pub llm_cedar: Option<PathBuf>,

    #[arg(long, value_name = "JSON")]
    pub agreement: Option<PathBuf>,

    /// Stats output to include; repeatable.
    #[arg(long, value_name = "JSON")]
    pub stats: Vec<PathBuf>,
}
