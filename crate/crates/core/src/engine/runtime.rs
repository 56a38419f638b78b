use std::collections::{BTreeSet, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::Event;
use crate::pattern::DEFAULT_PARTITION;
use crate::pmc::ForecastTable;
use crate::sfa::DisambiguatedDfa;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Recognition only.
    #[serde(rename = "rec")]
    Rec,
    /// Recognition plus forecasting.
    #[serde(rename = "rec+for")]
    RecFor,
}

impl Mode {
    pub fn parse(text: &str) -> Option<Mode> {
        match text {
            "rec" => Some(Mode::Rec),
            "recfor" | "rec+for" => Some(Mode::RecFor),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Rec => "rec",
            Mode::RecFor => "rec+for",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub partition_attribute: String,
    /// Restart a run at the initial state right after a detection.
    pub reset_on_detection: bool,
    /// Skip forecast emission when the state equals that of the previous
    /// forecast of the run.
    pub suppress_repeats: bool,
    /// Abort on events that cannot be classified; otherwise count and skip them.
    pub strict: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::RecFor,
            partition_attribute: DEFAULT_PARTITION.to_string(),
            reset_on_detection: true,
            suppress_repeats: false,
            strict: true,
        }
    }
}

/// The live automaton instance of one partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub partition: Arc<str>,
    pub state: usize,
    pub events_seen: u64,
    /// State of the last forecast emitted since the run (re)started.
    pub last_forecast: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub partition: Arc<str>,
    /// 1-based index of the completing event within its partition.
    pub index: u64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmittedForecast {
    pub partition: Arc<str>,
    /// Per-partition index of the event after which the forecast was made.
    pub index: u64,
    pub state: usize,
    /// Interval in events ahead of `index`.
    pub start: usize,
    pub end: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub detection: Option<Detection>,
    pub forecast: Option<EmittedForecast>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectionLog {
    pub partitions: BTreeSet<Arc<str>>,
    pub entries: Vec<Detection>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastLog {
    pub partitions: BTreeSet<Arc<str>>,
    pub entries: Vec<EmittedForecast>,
}

/// Everything a replay produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replay {
    pub detections: DetectionLog,
    pub forecasts: ForecastLog,
    pub events: u64,
    pub skipped: u64,
}

/// Runs a compiled pattern over a stream under partition contiguity.
#[derive(Debug, Clone)]
pub struct Engine {
    dfa: Arc<DisambiguatedDfa>,
    table: Option<Arc<ForecastTable>>,
    config: EngineConfig,
    runs: HashMap<Arc<str>, Run>,
    skipped: u64,
}

impl Engine {
    pub fn new(
        dfa: Arc<DisambiguatedDfa>,
        table: Option<Arc<ForecastTable>>,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        if config.mode == Mode::RecFor && table.is_none() {
            return Err(EngineError::MissingForecastTable);
        }
        Ok(Engine {
            dfa,
            table,
            config,
            runs: HashMap::new(),
            skipped: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn run(&self, partition: &str) -> Option<&Run> {
        self.runs.get(partition)
    }

    pub fn partitions(&self) -> BTreeSet<Arc<str>> {
        self.runs.keys().cloned().collect()
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn ingest(&mut self, event: &Event) -> Result<Outcome, EngineError> {
        let dfa = &self.dfa.dfa;
        let minterm = match dfa.alphabet.classify_index(event) {
            Ok(m) => m,
            Err(e) if self.config.strict => return Err(e.into()),
            Err(e) => {
                log::debug!("skipping event at {}: {e}", event.timestamp);
                self.skipped += 1;
                return Ok(Outcome::default());
            }
        };
        let key = event.partition_value(&self.config.partition_attribute);
        let run = match self.runs.get_mut(&key) {
            Some(run) => run,
            None => self.runs.entry(key.clone()).or_insert(Run {
                partition: key,
                state: dfa.initial,
                events_seen: 0,
                last_forecast: None,
            }),
        };
        run.events_seen += 1;
        let next = dfa.next(run.state, minterm);
        let mut outcome = Outcome::default();
        if dfa.is_final(next) {
            outcome.detection = Some(Detection {
                partition: run.partition.clone(),
                index: run.events_seen,
                timestamp: event.timestamp,
            });
            run.state = if self.config.reset_on_detection {
                dfa.initial
            } else {
                next
            };
            run.last_forecast = None;
            return Ok(outcome);
        }
        run.state = next;
        if self.config.mode == Mode::RecFor
            && !(self.config.suppress_repeats && run.last_forecast == Some(next))
        {
            if let Some(f) = self.table.as_ref().and_then(|t| t.get(next)) {
                run.last_forecast = Some(next);
                outcome.forecast = Some(EmittedForecast {
                    partition: run.partition.clone(),
                    index: run.events_seen,
                    state: next,
                    start: f.start,
                    end: f.end,
                    probability: f.probability,
                });
            }
        }
        Ok(outcome)
    }

    /// Ingests every event and collects the logs.
    pub fn replay<'a>(
        &mut self,
        events: impl IntoIterator<Item = &'a Event>,
    ) -> Result<Replay, EngineError> {
        let mut out = Replay::default();
        for e in events {
            let o = self.ingest(e)?;
            out.events += 1;
            out.detections.entries.extend(o.detection);
            out.forecasts.entries.extend(o.forecast);
        }
        let partitions = self.partitions();
        out.detections.partitions = partitions.clone();
        out.forecasts.partitions = partitions;
        out.skipped = self.skipped;
        Ok(out)
    }
}

fn shard_of(key: &str, workers: usize) -> usize {
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    (h.finish() % workers as u64) as usize
}

/// Replays with partitions sharded over `workers` threads. Output order is
/// the input order, so logs equal those of a single-worker replay.
pub fn replay_sharded(
    dfa: Arc<DisambiguatedDfa>,
    table: Option<Arc<ForecastTable>>,
    config: EngineConfig,
    events: &[Event],
    workers: usize,
) -> Result<Replay, EngineError> {
    if workers <= 1 {
        return Engine::new(dfa, table, config)?.replay(events);
    }
    let shards: Vec<usize> = events
        .iter()
        .map(|e| shard_of(&e.partition_value(&config.partition_attribute), workers))
        .collect();
    type ShardResult =
        Result<(Vec<(usize, Outcome)>, BTreeSet<Arc<str>>, u64), (usize, EngineError)>;
    let results: Vec<ShardResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let mut engine = Engine::new(dfa.clone(), table.clone(), config.clone());
                let shards = &shards;
                scope.spawn(move || -> ShardResult {
                    let engine = engine
                        .as_mut()
                        .map_err(|_| (0, EngineError::MissingForecastTable))?;
                    let mut outs = Vec::new();
                    for (seq, e) in events.iter().enumerate().filter(|(i, _)| shards[*i] == w) {
                        let o = engine.ingest(e).map_err(|err| (seq, err))?;
                        if o.detection.is_some() || o.forecast.is_some() {
                            outs.push((seq, o));
                        }
                    }
                    Ok((outs, engine.partitions(), engine.skipped()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut merged = Vec::new();
    let mut partitions = BTreeSet::new();
    let mut skipped = 0;
    let mut first_error: Option<(usize, EngineError)> = None;
    for r in results {
        match r {
            Ok((outs, parts, s)) => {
                merged.extend(outs);
                partitions.extend(parts);
                skipped += s;
            }
            Err((seq, e)) => {
                if first_error.as_ref().is_none_or(|(s, _)| seq < *s) {
                    first_error = Some((seq, e));
                }
            }
        }
    }
    if let Some((_, e)) = first_error {
        return Err(e);
    }
    merged.sort_by_key(|(seq, _)| *seq);
    let mut out = Replay {
        events: events.len() as u64,
        skipped,
        ..Replay::default()
    };
    for (_, o) in merged {
        out.detections.entries.extend(o.detection);
        out.forecasts.entries.extend(o.forecast);
    }
    out.detections.partitions = partitions.clone();
    out.forecasts.partitions = partitions;
    Ok(out)
}
