use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DetectionLog, EngineError, ForecastLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Correct over scored forecasts; 0 when nothing was scored.
    pub precision: f64,
    pub spread_mean: f64,
    pub spread_per_forecast: Vec<usize>,
    pub detections: usize,
    pub forecasts_scored: usize,
    /// Per-forecast verdicts in log order.
    #[serde(skip)]
    pub correct: Vec<bool>,
}

/// Scores each forecast against the next detection of its partition.
///
/// A forecast made at index `i` with interval `[s, e]` is correct when that
/// detection happens at `d` with `i + s <= d <= i + e`. Forecasts with no
/// later detection count as wrong. Spread is `e - s`.
pub fn evaluate_forecasts(
    forecasts: &ForecastLog,
    detections: &DetectionLog,
) -> Result<EvaluationReport, EngineError> {
    if forecasts.partitions != detections.partitions {
        return Err(EngineError::MismatchedLogs {
            only_forecasts: forecasts
                .partitions
                .difference(&detections.partitions)
                .count(),
            only_detections: detections
                .partitions
                .difference(&forecasts.partitions)
                .count(),
        });
    }
    let mut by_partition: HashMap<&str, Vec<u64>> = HashMap::new();
    for d in &detections.entries {
        by_partition.entry(&d.partition).or_default().push(d.index);
    }
    for v in by_partition.values_mut() {
        v.sort_unstable();
    }
    let n = forecasts.entries.len();
    let mut correct = Vec::with_capacity(n);
    let mut spreads = Vec::with_capacity(n);
    for f in &forecasts.entries {
        let next = by_partition.get(&*f.partition).and_then(|ds| {
            let k = ds.partition_point(|&d| d <= f.index);
            ds.get(k).copied()
        });
        let ok = next.is_some_and(|d| f.index + f.start as u64 <= d && d <= f.index + f.end as u64);
        correct.push(ok);
        spreads.push(f.end - f.start);
    }
    let hits = correct.iter().filter(|&&c| c).count();
    let (precision, spread_mean) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            hits as f64 / n as f64,
            spreads.iter().sum::<usize>() as f64 / n as f64,
        )
    };
    Ok(EvaluationReport {
        precision,
        spread_mean,
        spread_per_forecast: spreads,
        detections: detections.entries.len(),
        forecasts_scored: n,
        correct,
    })
}
