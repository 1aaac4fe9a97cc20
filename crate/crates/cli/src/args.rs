use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use streamtgn_core::drift::RebuildPolicy;
use streamtgn_core::incremental::Mode;
use streamtgn_core::io::Attachment;
use streamtgn_core::model::Aggregator;

#[derive(Debug, Parser)]
#[command(
    name = "streamtgn",
    version,
    about = "Incremental temporal GNN inference: streams, verification and benchmarks"
)]
pub struct Cli {
    /// Service to talk to. Without it an in-process server is started.
    #[arg(long, global = true, env = "STREAMTGN_SERVER")]
    pub server: Option<String>,

    /// key=value settings applied before any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic edge stream.
    Gen(GenArgs),
    /// Run the incremental engine against full recomputation.
    Verify(RunArgs),
    /// Per-batch work counters, or a sweep over B or L.
    Bench(BenchArgs),
    /// Sequential vs batched prediction deviation per batch size.
    Staleness(StalenessArgs),
    /// Adaptive rebuild count against the drift-matched fixed schedule.
    PolicyCompare(PolicyArgs),
    /// Closed-form speedup rows.
    SpeedupTable(SpeedupArgs),
    #[command(subcommand)]
    Params(ParamsCommand),
    /// Run the HTTP service in the foreground.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    #[arg(long = "d-e", default_value_t = 4)]
    pub d_e: usize,
    #[arg(long, default_value_t = Attachment::Uniform)]
    pub attachment: Attachment,
    /// High-to-low epoch rate ratio.
    #[arg(long, default_value_t = 1.0)]
    pub burstiness: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long = "epoch-length", default_value_t = 1000.0)]
    pub epoch_length: f64,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Edge file; falls back to the config's `input`.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Parameter file from `params init`; drawn from the seed otherwise.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Report file. Overrides STREAMTGN_REPORT and the config's `report`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(short = 'B', long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(short = 'L', long)]
    pub fanout: Option<usize>,
    /// Time window on sampled neighbors, or `none`.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(short = 'K', long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub aggregator: Option<Aggregator>,
    /// adaptive, never or fixed:<R>.
    #[arg(long)]
    pub policy: Option<RebuildPolicy>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "delta-max")]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "check-every")]
    pub check_every: Option<usize>,
    /// Sort out-of-order rows instead of rejecting them.
    #[arg(long)]
    pub sort: bool,
    /// Any config key, e.g. `--set d_k=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Sweep batch sizes, e.g. `200,400,600`.
    #[arg(long = "sweep-batch-sizes", value_delimiter = ',', conflicts_with_all = ["sweep_fanouts", "sweep_rebuild_intervals"])]
    pub sweep_batch_sizes: Vec<usize>,
    /// Sweep fanouts, e.g. `5,10,15`.
    #[arg(
        long = "sweep-fanouts",
        value_delimiter = ',',
        conflicts_with = "sweep_rebuild_intervals"
    )]
    pub sweep_fanouts: Vec<usize>,
    /// Sweep fixed rebuild intervals, e.g. `50,200,never`.
    #[arg(long = "sweep-rebuild-intervals", value_delimiter = ',', value_parser = parse_interval)]
    pub sweep_rebuild_intervals: Vec<usize>,
}

/// `never` maps to 0.
fn parse_interval(s: &str) -> Result<usize, String> {
    match s {
        "never" => Ok(0),
        _ => match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive interval or `never`, got `{s}`")),
            Ok(v) => Ok(v),
        },
    }
}

#[derive(Debug, Args)]
pub struct StalenessArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long = "batch-sizes", value_delimiter = ',', default_value = "1,10,100,1000")]
    pub batch_sizes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Leading batches left out of the worst-drift comparison.
    #[arg(long, default_value_t = 0)]
    pub warmup: usize,
}

#[derive(Debug, Args)]
pub struct SpeedupArgs {
    /// Extra row `n,B,L,K`. Repeatable.
    #[arg(long = "row", value_name = "N,B,L,K")]
    pub rows: Vec<String>,
    /// Print only the `--row` rows.
    #[arg(long)]
    pub only_rows: bool,
}

#[derive(Debug, Subcommand)]
pub enum ParamsCommand {
    /// Write freshly initialized parameters.
    Init(ParamsInitArgs),
    /// Validate a parameter file and summarize it.
    Dump(ParamsDumpArgs),
}

#[derive(Debug, Args)]
pub struct ParamsInitArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dimension keys, e.g. `--set d=16 --set layers=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamsDumpArgs {
    pub file: PathBuf,
    /// Also print the canonical text.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: std::net::SocketAddr,
}
