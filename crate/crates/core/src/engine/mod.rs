//! Streaming runtime: one automaton run per partition, detections and
//! forecast emission, forecast scoring, throughput measurement and
//! synthetic stream generation.

mod bench;
mod eval;
pub mod io;
mod runtime;
mod synth;

use thiserror::Error;

use crate::algebra::AlgebraError;

pub use bench::{benchmark_throughput, slowdown, ThroughputReport, WARMUP_FRACTION};
pub use eval::{evaluate_forecasts, EvaluationReport};
pub use runtime::{
    replay_sharded, Detection, DetectionLog, EmittedForecast, Engine, EngineConfig, ForecastLog,
    Mode, Outcome, Replay, Run,
};
pub use synth::{
    ais_proposal, alphabet_proposal, generate_synthetic_stream, partition_keys, AttributeEmitter,
    IidSource, MarkovSource, MintermSource, PmcSource, RejectionEmitter, SourceState,
    TemplateEmitter, DEFAULT_MAX_TRIES,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("forecasting mode needs a forecast table")]
    MissingForecastTable,
    #[error("forecast and detection logs cover different partitions ({only_forecasts} only in forecasts, {only_detections} only in detections)")]
    MismatchedLogs {
        only_forecasts: usize,
        only_detections: usize,
    },
    #[error("no attribute assignment found for minterm {minterm} after {tries} tries")]
    UninvertibleMinterm { minterm: usize, tries: usize },
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("record {record}: {message}")]
    BadRecord { record: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
