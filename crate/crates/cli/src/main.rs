//! `cef`: compile patterns, learn chains, run and score forecasts.

mod commands;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cef::algebra::AlgebraError;
use cef::sfa::DEFAULT_STATE_CAP;

/// Marks a failure caused by bad invocation rather than bad data.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Marks a broken internal invariant.
#[derive(Debug)]
pub struct Internal(pub String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for Internal {}

#[derive(Parser)]
#[command(
    name = "cef",
    version,
    about = "Complex event forecasting over symbolic automata"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleArg {
    /// Keep every sign combination.
    Assume,
    /// Drop combinations whose numeric bands cannot overlap.
    Interval,
}

#[derive(Debug, Clone, Args)]
pub struct PatternArgs {
    /// Pattern file.
    #[arg(long)]
    pub pattern: PathBuf,
    /// Assumed Markov order; overrides the pattern's `[config]`.
    #[arg(long)]
    pub order: Option<usize>,
    /// Forecast confidence threshold in (0, 1].
    #[arg(long)]
    pub theta: Option<f64>,
    /// Fixed waiting-time horizon; automatic when absent.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// JSON file of named points, polygons and circles.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Fishing-vessel ids, one per line.
    #[arg(long)]
    pub fishing: Option<PathBuf>,
    /// Extra predicates added to the alphabet, e.g. "SpeedBetween(x, 0, 10)".
    #[arg(long)]
    pub extras: Option<String>,
    #[arg(long, value_enum, default_value_t = OracleArg::Assume)]
    pub oracle: OracleArg,
    /// Upper bound on automaton states after disambiguation.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Training stream to learn the chain from.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Previously learned chain (`pmc.json`).
    #[arg(long, conflicts_with = "train")]
    pub model: Option<PathBuf>,
    /// Add-one smoothing when learning.
    #[arg(long)]
    pub laplace: bool,
    /// Learn from the stream as one sequence instead of per partition.
    #[arg(long)]
    pub pooled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rec,
    Recfor,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Stream to replay.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Do not restart a run after a detection.
    #[arg(long)]
    pub no_reset: bool,
    /// Only emit a forecast when the state differs from the last forecast's.
    #[arg(long)]
    pub suppress_repeats: bool,
    /// Skip events that cannot be classified instead of aborting.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Number of events.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub partitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Center of generated positions as "lon,lat"; defaults to the first
    /// named point of the regions file.
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long, default_value_t = 20.0)]
    pub radius_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    /// Independent minterms with `--probs` (uniform by default).
    Iid,
    /// Walk the automaton with a learned chain.
    Pmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Ndjson,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a pattern and dump its automaton.
    Compile {
        #[command(flatten)]
        pattern: PatternArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Learn the transition matrix and forecast table from a stream.
    Learn {
        #[command(flatten)]
        pattern: PatternArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay a stream, writing detections and forecasts.
    Run {
        #[command(flatten)]
        pattern: PatternArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Recfor)]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay a stream with forecasting and score the forecasts.
    Evaluate {
        #[command(flatten)]
        pattern: PatternArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Precision and spread over a grid of thresholds, orders and extras.
    Sweep {
        #[command(flatten)]
        pattern: PatternArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated thresholds; empty for none. Defaults to the pattern's.
        #[arg(long)]
        thetas: Option<String>,
        /// Comma-separated orders; empty for none. Defaults to the pattern's.
        #[arg(long)]
        orders: Option<String>,
        /// Extra-predicate list per pattern variation; repeatable. "none"
        /// is the bare pattern.
        #[arg(long = "variant")]
        variants: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Throughput with and without forecasting.
    Bench {
        #[command(flatten)]
        pattern: PatternArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Stream to time; generated when absent.
        #[arg(long)]
        test: Option<PathBuf>,
        #[command(flatten)]
        generate: GenArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic stream for a pattern's alphabet.
    Generate {
        #[command(flatten)]
        pattern: PatternArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        generate: GenArgs,
        #[arg(long, value_enum, default_value_t = SourceArg::Iid)]
        source: SourceArg,
        /// Comma-separated minterm probabilities for the i.i.d. source.
        #[arg(long)]
        probs: Option<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if cause.is::<Internal>() {
            return 3;
        }
        if let Some(AlgebraError::NoMatchingMinterm { .. } | AlgebraError::AmbiguousMinterms) =
            cause.downcast_ref()
        {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Compile { pattern, out } => commands::compile(&pattern, &out),
        Command::Learn {
            pattern,
            model,
            out,
        } => commands::learn(&pattern, &model, &out),
        Command::Run {
            pattern,
            model,
            run,
            mode,
            out,
        } => commands::run(&pattern, &model, &run, mode, &out).map(|_| ()),
        Command::Evaluate {
            pattern,
            model,
            run,
            out,
        } => commands::evaluate(&pattern, &model, &run, &out),
        Command::Sweep {
            pattern,
            model,
            run,
            thetas,
            orders,
            variants,
            out,
        } => commands::sweep(
            &pattern,
            &model,
            &run,
            thetas.as_deref(),
            orders.as_deref(),
            &variants,
            &out,
        ),
        Command::Bench {
            pattern,
            model,
            test,
            generate,
            out,
        } => commands::bench(&pattern, &model, test.as_deref(), &generate, &out),
        Command::Generate {
            pattern,
            model,
            generate,
            source,
            probs,
            format,
            out,
        } => commands::generate(
            &pattern,
            &model,
            &generate,
            source,
            probs.as_deref(),
            format,
            &out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
