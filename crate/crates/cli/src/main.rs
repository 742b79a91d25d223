//! `causeway`: batch front end for discovery, effects, RCA, evaluation and the HTTP service.

mod commands;
mod error;
mod evaluate;
mod synthetic;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "causeway", version, about = "Causal discovery and root-cause analysis for sensor data")]
pub struct Cli {
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a causal graph from a CSV dataset.
    Discover(DiscoverArgs),
    /// Total-effect matrices of a graph, or a what-if intervention.
    Effects(EffectsArgs),
    /// Check predicted effects against matched observations (CSV table).
    Counterfactuals(CounterfactualArgs),
    /// Rank root causes for one observation.
    Rca(RcaArgs),
    /// Compare causal RCA, the correlation baseline and the ontology-free variant on labelled faults.
    Evaluate(EvaluateArgs),
    /// Answer one competency question.
    Qa(QaArgs),
    /// Write a synthetic plant: data, ground-truth graph, tolerances, faults and ontology.
    GenSynthetic(SyntheticArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DiscoveryFlags {
    /// Discovery config JSON (fields default when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_bootstrap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub discovery: DiscoveryFlags,
    /// Comma-separated variables to keep.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["top_correlated", "top_variance"])]
    pub features: Option<Vec<String>>,
    /// Keep the k variables most correlated with the anomaly label.
    #[arg(long, conflicts_with = "top_variance")]
    pub top_correlated: Option<usize>,
    /// Keep the k variables with the largest normalised variance.
    #[arg(long)]
    pub top_variance: Option<usize>,
    /// Graph JSON output; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write the per-edge bootstrap statistics here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EffectsArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Include the k-hop matrices `B^0..B^(p-1)`.
    #[arg(long)]
    pub hops: bool,
    /// Predict the effect of moving this variable from `--a1` to `--a2`.
    #[arg(long)]
    pub whatif: Option<String>,
    #[arg(long, requires = "whatif", allow_hyphen_values = true)]
    pub a1: Option<f64>,
    #[arg(long, requires = "whatif", allow_hyphen_values = true)]
    pub a2: Option<f64>,
    /// Dataset for quartile defaults of `--a1`/`--a2`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    /// JSON list of `{source, target, a1?, a2?, epsilon?}`; all pairs above `--delta` when omitted.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RcaMethodArg {
    Causal,
    Correlation,
}

#[derive(Debug, Args)]
pub struct RcaArgs {
    #[arg(long, required_if_eq("method", "causal"))]
    pub graph: Option<PathBuf>,
    /// Tolerance JSON; falls back to the ontology's tolerances.
    #[arg(long)]
    pub tolerances: Option<PathBuf>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// JSON object of observed values by variable.
    #[arg(long, conflicts_with = "row")]
    pub values: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Row of `--data` to analyse.
    #[arg(long, requires = "data")]
    pub row: Option<usize>,
    #[arg(long)]
    pub cycle_state: Option<String>,
    /// Anomalous variable; defaults to the most deviant one.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = RcaMethodArg::Causal)]
    pub method: RcaMethodArg,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Normal-operation history used for discovery and the correlation baseline.
    #[arg(long)]
    pub data: PathBuf,
    /// Fault suite JSON: `{nodes, cases: [{id, target, root_cause, cycle_state, values}]}`.
    #[arg(long)]
    pub faults: PathBuf,
    #[arg(long)]
    pub tolerances: Option<PathBuf>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Expert edits (JSON lines) applied on top of the discovered graph.
    #[arg(long)]
    pub edits: Option<PathBuf>,
    /// JSON list of `{question, reference, case?}` for ROUGE-1 scoring of answers.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Use this graph instead of running discovery.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    pub discovery: DiscoveryFlags,
    /// Cut-off for the Jaccard column.
    #[arg(long, default_value_t = 1)]
    pub jaccard_k: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Table)]
    pub format: TableFormat,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QaArgs {
    pub question: String,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// RCA report JSON (from `causeway rca`).
    #[arg(long)]
    pub rca: Option<PathBuf>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Discovery config JSON, for questions about the discovery run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset whose medians serve as reference levels for interventions.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Print only the answer text.
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultModeArg {
    Propagated,
    Sensor,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Add a hidden common driver of the target and one extra observed variable.
    #[arg(long)]
    pub confounded: bool,
    #[arg(long, value_enum, default_value_t = FaultModeArg::Propagated)]
    pub mode: FaultModeArg,
    #[arg(long, short, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub state_dir: Option<PathBuf>,
    /// Discovery config JSON used by `POST /discover`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replay_rate: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if std::env::args().any(|a| a == "--json") {
                let text = e.to_string();
                let first = text.lines().next().unwrap_or("invalid arguments");
                report(&CliError::Usage(first.trim_start_matches("error: ").to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(error::EXIT_USAGE as u8);
        }
    };
    let json = cli.json;
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, json);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report(e: &CliError, json: bool) {
    if json {
        eprintln!("{}", e.to_json());
    } else {
        eprintln!("error: {e}");
    }
}
