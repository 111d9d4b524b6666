mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distflow::Error;

#[derive(Parser, Debug)]
#[command(name = "distflow", version, about = "Information flow, online dependence and coupling analysis of distributed executions")]
struct Cli {
    /// Run every data-parallel step on one thread
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write traces, static graphs, endpoints and ground truth
    Simulate(SimulateArgs),
    /// Compute method-level and statement-level information flow paths
    Flowpaths(FlowpathsArgs),
    /// Run the budgeted online dependence analysis, one worker per process
    Seads(SeadsArgs),
    /// Answer dependence queries from a finished online analysis
    Query(QueryArgs),
    /// Compute interprocess coupling and cohesion metrics
    Metrics(MetricsArgs),
    /// Rank-correlate metric columns of a feature table
    Correlate(CorrelateArgs),
    /// Split the subjects of a feature table into normal and anomalous
    Classify(ClassifyArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario JSON with topology, seed and length
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// client_server, peer_to_peer or n_tier(N); used without --scenario
    #[arg(long, default_value = "client_server")]
    topology: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target event count
    #[arg(long, default_value_t = 200)]
    length: u64,
    /// Run directory to create
    #[arg(long, env = "DISTFLOW_OUT")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Default,
    Sim,
    Mul,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SpliceArg {
    Peer,
    Strict,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RemoteArg {
    Causal,
    FirstMessage,
}

#[derive(Args, Debug)]
pub struct FlowpathsArgs {
    /// Run directory written by `simulate`
    #[arg(long)]
    run: Option<PathBuf>,
    /// Trace bundle directory (default: <run>/traces)
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Static graph file (default: the context- and flow-sensitive graph of the run)
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Sources/sinks file (default: <run>/sources_sinks.cfg)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "peer")]
    splice: SpliceArg,
    #[arg(long, value_enum, default_value = "causal")]
    remote: RemoteArg,
    /// Longest method-level path kept
    #[arg(long, default_value_t = 16)]
    path_limit: usize,
    /// Most statement-level paths enumerated per segment
    #[arg(long, default_value_t = 20_000)]
    max_paths: usize,
    /// Write phase1.txt and phase2.txt here instead of printing
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SeadsArgs {
    /// Run directory written by `simulate`
    #[arg(long)]
    run: PathBuf,
    /// Time budget per round
    #[arg(long)]
    budget: f64,
    /// Events per round
    #[arg(long, default_value_t = 50)]
    tc: u64,
    /// Logical time between rounds
    #[arg(long, default_value_t = 0.0)]
    tt: f64,
    /// Keep one configuration instead of learning, e.g. 111111
    #[arg(long)]
    pin_config: Option<String>,
    /// First configuration when learning
    #[arg(long, default_value = "111111")]
    initial: String,
    /// `synthetic`, `wallclock`, or a per-configuration cost table file
    #[arg(long, default_value = "synthetic")]
    cost_model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Bootstrap from the next state's row instead of the whole table
    #[arg(long)]
    next_state_max: bool,
    /// Leave events after the last triggered round unanalyzed
    #[arg(long)]
    no_flush: bool,
    /// Output directory (default: <run>/seads)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    /// Run directory written by `simulate`
    #[arg(long)]
    run: PathBuf,
    /// Output directory of `seads` (default: <run>/seads)
    #[arg(long)]
    seads: Option<PathBuf>,
    /// File of `query <Class: method>` lines
    #[arg(long)]
    requests: Option<PathBuf>,
    /// Methods to query, as `Class: method`
    methods: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RccArg {
    Prose,
    Table,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Run directory; dependence data is derived from its traces
    #[arg(long, conflicts_with = "deps")]
    run: Option<PathBuf>,
    /// Dependence data file
    #[arg(long)]
    deps: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "prose")]
    rcc: RccArg,
    /// Also write the dependence data used
    #[arg(long)]
    dump_deps: Option<PathBuf>,
    /// Endpoint methods, channels, files and logical SLOC
    #[arg(long, num_args = 4, value_names = ["METHODS", "CHANNELS", "FILES", "SLOC"])]
    attack_surface: Option<Vec<f64>>,
    /// Known vulnerabilities without a severity score
    #[arg(long)]
    vuln_unscored: Option<u64>,
    /// Scored vulnerability as CVSS:YEARS; repeatable
    #[arg(long = "vuln")]
    vulns: Vec<String>,
    /// Weight vulnerabilities by (100 - years) / 100
    #[arg(long)]
    vuln_corrected: bool,
    /// Statement-level path report to summarize
    #[arg(long, requires = "ksloc")]
    paths: Option<PathBuf>,
    #[arg(long)]
    ksloc: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    /// Tab-separated table, header row first
    #[arg(long)]
    table: PathBuf,
    /// Row metrics, comma-separated (default: the IPC metrics present)
    #[arg(long, value_delimiter = ',')]
    rows: Vec<String>,
    /// Column metrics, comma-separated (default: every other column)
    #[arg(long, value_delimiter = ',')]
    cols: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    table: PathBuf,
    /// Feature columns, comma-separated (default: all)
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failures with the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::InvalidConfiguration { .. }) => 4,
            CliError::Core(Error::Config(_)) => 2,
            CliError::Core(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => 2,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e @ Error::InvalidConfiguration { .. }) => {
                write!(f, "{e} (invalid masks: 001xxx 010xxx 011xxx 0xxx1x xxx0x1 000000)")
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { distflow::Exec::Sequential } else { distflow::Exec::Parallel };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Flowpaths(a) => commands::flowpaths(a, exec),
        Command::Seads(a) => commands::seads(a, exec),
        Command::Query(a) => commands::query(a),
        Command::Metrics(a) => commands::metrics(a, exec),
        Command::Correlate(a) => commands::correlate(a),
        Command::Classify(a) => commands::classify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("distflow: {e}");
            ExitCode::from(e.code())
        }
    }
}
