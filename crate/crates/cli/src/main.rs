mod commands;
mod grid;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use grid::FloatGrid;
use manybell::binning::{BinningStrategy, TiePolicy};
use manybell::optimize::SearchMode;

#[derive(Parser, Debug)]
#[command(
    name = "manybell",
    version,
    about = "Many-pair CHSH tests with collective measurements"
)]
struct Cli {
    /// Worker threads for the compute pipelines (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Critical visibility V_c(n) over a range of sizes, with the two-term fit.
    ScanVc(ScanVcArgs),
    /// S_n against beta for fixed sizes, plus the optimum per size.
    MaxS(MaxSArgs),
    /// Simulated event streams for a list of beta values.
    Simulate(SimulateArgs),
    /// S_n curves and the critical size from event files.
    Analyze(AnalyzeArgs),
    /// Majority against parity on a V x n grid, with the crossover visibility.
    Compare(CompareArgs),
    /// Parity violation left at half the critical size, R(V).
    Ratio(RatioArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Majority,
    Parity,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieArg {
    Minus,
    Plus,
    Random,
}

impl TieArg {
    fn policy(self) -> TiePolicy {
        match self {
            TieArg::Minus => TiePolicy::TieToMinus,
            TieArg::Plus => TiePolicy::TieToPlus,
            TieArg::Random => TiePolicy::Randomized,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    /// One-angle family of settings.
    Beta,
    /// All four analyzer angles free.
    Planar,
}

impl ModeArg {
    fn mode(self) -> SearchMode {
        match self {
            ModeArg::Beta => SearchMode::BetaFamily,
            ModeArg::Planar => SearchMode::FullPlanar,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct BinningArgs {
    #[arg(long, value_enum, default_value = "majority")]
    strategy: StrategyArg,
    /// Tie rule for majority voting at even n.
    #[arg(long, value_enum, default_value = "minus")]
    tie: TieArg,
}

impl BinningArgs {
    fn strategy(&self) -> BinningStrategy {
        match self.strategy {
            StrategyArg::Majority => BinningStrategy::Majority(self.tie.policy()),
            StrategyArg::Parity => BinningStrategy::Parity,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct OutputArgs {
    /// Output file. Defaults to $MANYBELL_OUT_DIR/<subcommand>.<format>,
    /// or standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanVcArgs {
    #[command(flatten)]
    binning: BinningArgs,
    #[arg(long, value_enum, default_value = "beta")]
    mode: ModeArg,
    /// Sizes: `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..20", value_parser = grid::parse_sizes)]
    n: std::vec::Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct MaxSArgs {
    #[command(flatten)]
    binning: BinningArgs,
    #[arg(long, default_value = "1,2,4,8,12,16", value_parser = grid::parse_sizes)]
    n: std::vec::Vec<usize>,
    #[arg(long, default_value = "1", value_parser = grid::parse_visibility)]
    v: f64,
    /// Angles: `a..b` (with --steps points) or a comma list.
    #[arg(long, default_value = "0.01..0.8", value_parser = grid::parse_floats)]
    beta: FloatGrid,
    #[arg(long, default_value_t = 80, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// Angles: `a..b` (with --steps points) or a comma list.
    #[arg(long, value_parser = grid::parse_floats)]
    beta: FloatGrid,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    /// Werner visibility.
    #[arg(long, default_value = "1", value_parser = grid::parse_visibility)]
    v: f64,
    /// Explicit correlators e11,e12,e21,e22 instead of a Werner state.
    #[arg(long, value_parser = grid::parse_correlators)]
    table: Option<[f64; 4]>,
    /// Events requested per stream.
    #[arg(long, default_value_t = manybell::simulate::DEFAULT_EVENTS_PER_RUN)]
    events: usize,
    /// Record every setting pair in all four analyzer variants.
    #[arg(long)]
    symmetrize: bool,
    #[arg(long, default_value = "1", value_parser = grid::parse_unit)]
    eta_t_a: f64,
    #[arg(long, default_value = "1", value_parser = grid::parse_unit)]
    eta_r_a: f64,
    #[arg(long, default_value = "1", value_parser = grid::parse_unit)]
    eta_t_b: f64,
    #[arg(long, default_value = "1", value_parser = grid::parse_unit)]
    eta_r_b: f64,
    /// Probability of discarding an event (double coincidences).
    #[arg(long, default_value = "0", value_parser = grid::parse_unit)]
    discard: f64,
    /// Master seed; beta number k uses seed + 4k.
    #[arg(long)]
    seed: u64,
    /// Event file (`.jsonl` or `.csv`). Defaults to
    /// $MANYBELL_OUT_DIR/events.jsonl, or standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    /// s > 2.
    Point,
    /// s - k*sigma > 2.
    Ksigma,
}

#[derive(Args, Debug, Serialize)]
pub struct AnalyzeArgs {
    /// Event files written by `simulate`.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[command(flatten)]
    binning: BinningArgs,
    #[arg(long, default_value = "1..20", value_parser = grid::parse_sizes)]
    n: std::vec::Vec<usize>,
    #[arg(long, value_enum, default_value = "point")]
    criterion: CriterionArg,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    #[arg(long, default_value_t = manybell::analyze::DEFAULT_RESAMPLES, value_parser = clap::value_parser!(usize))]
    resamples: usize,
    /// Bootstrap seed.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value = "0.98..1.0", value_parser = grid::parse_visibilities)]
    v: FloatGrid,
    #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[arg(long, default_value = "1..80", value_parser = grid::parse_sizes)]
    n: std::vec::Vec<usize>,
    /// Tie rule for majority voting at even n.
    #[arg(long, value_enum, default_value = "minus")]
    tie: TieArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct RatioArgs {
    #[arg(long, default_value = "0.95..0.999", value_parser = grid::parse_visibilities)]
    v: FloatGrid,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
