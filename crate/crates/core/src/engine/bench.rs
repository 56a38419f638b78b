use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algebra::Event;
use crate::pmc::ForecastTable;
use crate::sfa::DisambiguatedDfa;

use super::{Engine, EngineConfig, EngineError, Mode};

/// Leading share of the stream ingested before the clock starts.
pub const WARMUP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub mode: Mode,
    /// Timed events, warm-up excluded.
    pub events_processed: u64,
    pub wall_seconds: f64,
    /// 0 when `rate_defined` is false.
    pub events_per_second: f64,
    pub rate_defined: bool,
    pub detections: u64,
    pub forecasts: u64,
}

/// Times the ingest loop of a single engine over `stream` in `mode`.
pub fn benchmark_throughput(
    dfa: Arc<DisambiguatedDfa>,
    table: Option<Arc<ForecastTable>>,
    config: &EngineConfig,
    stream: &[Event],
    mode: Mode,
) -> Result<ThroughputReport, EngineError> {
    let config = EngineConfig {
        mode,
        ..config.clone()
    };
    let mut engine = Engine::new(dfa, table, config)?;
    let warmup = (stream.len() as f64 * WARMUP_FRACTION).floor() as usize;
    for e in &stream[..warmup] {
        black_box(engine.ingest(e)?);
    }
    let timed = &stream[warmup..];
    let (mut detections, mut forecasts) = (0u64, 0u64);
    let clock = Instant::now();
    for e in timed {
        let o = black_box(engine.ingest(e)?);
        detections += o.detection.is_some() as u64;
        forecasts += o.forecast.is_some() as u64;
    }
    let wall_seconds = clock.elapsed().as_secs_f64();
    let events_processed = timed.len() as u64;
    let rate_defined = events_processed > 0 && wall_seconds > 0.0;
    Ok(ThroughputReport {
        mode,
        events_processed,
        wall_seconds,
        events_per_second: if rate_defined {
            events_processed as f64 / wall_seconds
        } else {
            0.0
        },
        rate_defined,
        detections,
        forecasts,
    })
}

/// How many times slower forecasting mode ran, if both rates are defined.
pub fn slowdown(rec: &ThroughputReport, rec_for: &ThroughputReport) -> Option<f64> {
    (rec.rate_defined && rec_for.rate_defined)
        .then(|| rec.events_per_second / rec_for.events_per_second)
}
