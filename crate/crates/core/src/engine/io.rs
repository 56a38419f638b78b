//! Stream and log files.
//!
//! Streams are CSV with a `timestamp,partitionKey,lon,lat,speed,heading`
//! header plus optional extra columns, or newline-delimited JSON objects
//! with the same field names. Empty CSV fields are treated as absent.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::algebra::{Event, Value};
use crate::pattern::DEFAULT_PARTITION;

use super::{DetectionLog, EngineError, ForecastLog};

pub const TIMESTAMP: &str = "timestamp";
/// Columns every written stream starts with, after the timestamp.
pub const STANDARD_COLUMNS: [&str; 5] = [DEFAULT_PARTITION, "lon", "lat", "speed", "heading"];

fn bad(record: usize, message: impl Into<String>) -> EngineError {
    EngineError::BadRecord {
        record,
        message: message.into(),
    }
}

fn parse_timestamp(raw: &str, record: usize) -> Result<i64, EngineError> {
    let raw = raw.trim();
    raw.parse::<i64>()
        .or_else(|_| raw.parse::<f64>().map(|v| v as i64))
        .map_err(|_| bad(record, format!("timestamp `{raw}` is not a number")))
}

pub fn read_stream_csv(reader: impl Read) -> Result<Vec<Event>, EngineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<Arc<str>> = rdr.headers()?.iter().map(Arc::from).collect();
    let ts_col = headers
        .iter()
        .position(|h| &**h == TIMESTAMP)
        .ok_or_else(|| bad(0, "missing `timestamp` column"))?;
    let key_col = headers
        .iter()
        .position(|h| &**h == DEFAULT_PARTITION)
        .ok_or_else(|| bad(0, format!("missing `{DEFAULT_PARTITION}` column")))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let record = i + 1;
        let mut e = Event::new(parse_timestamp(&rec[ts_col], record)?, &rec[key_col]);
        for (c, field) in rec.iter().enumerate() {
            if c != ts_col && c != key_col && !field.is_empty() {
                e.set(headers[c].clone(), Value::parse_field(field));
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Column order: timestamp, the standard columns, then any other attribute
/// in order of first appearance.
pub fn write_stream_csv(writer: impl Write, events: &[Event]) -> Result<(), EngineError> {
    let mut columns: Vec<&str> = STANDARD_COLUMNS[1..].to_vec();
    let mut seen: HashSet<&str> = columns.iter().copied().collect();
    for e in events {
        for (k, _) in e.attributes() {
            if k != DEFAULT_PARTITION && seen.insert(k) {
                columns.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![TIMESTAMP, DEFAULT_PARTITION];
    header.extend(&columns);
    w.write_record(&header)?;
    for e in events {
        let mut row = vec![e.timestamp.to_string(), e.partition.to_string()];
        row.extend(
            columns
                .iter()
                .map(|c| e.get(c).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream_ndjson(reader: impl BufRead) -> Result<Vec<Event>, EngineError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let record = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line)?;
        let ts = match obj.get(TIMESTAMP) {
            Some(serde_json::Value::Number(n)) => n
                .as_i64()
                .or_else(|| n.as_f64().map(|v| v as i64))
                .ok_or_else(|| bad(record, "timestamp out of range"))?,
            Some(serde_json::Value::String(s)) => parse_timestamp(s, record)?,
            _ => return Err(bad(record, "missing `timestamp`")),
        };
        let key = match obj.get(DEFAULT_PARTITION) {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => return Err(bad(record, format!("missing `{DEFAULT_PARTITION}`"))),
        };
        let mut e = Event::new(ts, key);
        for (k, v) in obj {
            if k == TIMESTAMP || k == DEFAULT_PARTITION || v.is_null() {
                continue;
            }
            let value: Value = serde_json::from_value(v)
                .map_err(|err| bad(record, format!("field `{k}`: {err}")))?;
            e.set(k, value);
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_stream_ndjson(mut writer: impl Write, events: &[Event]) -> Result<(), EngineError> {
    for e in events {
        let mut obj = serde_json::Map::new();
        obj.insert(TIMESTAMP.into(), e.timestamp.into());
        obj.insert(DEFAULT_PARTITION.into(), e.partition.to_string().into());
        for (k, v) in e.attributes() {
            obj.insert(k.to_string(), serde_json::to_value(v)?);
        }
        serde_json::to_writer(&mut writer, &obj)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

fn is_ndjson(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("ndjson" | "jsonl" | "json")
    )
}

/// Reads a stream, choosing the format by extension (`.ndjson`, `.jsonl`
/// and `.json` are JSON lines; anything else is CSV).
pub fn read_stream(path: &Path) -> Result<Vec<Event>, EngineError> {
    let file = BufReader::new(File::open(path)?);
    if is_ndjson(path) {
        read_stream_ndjson(file)
    } else {
        read_stream_csv(file)
    }
}

pub fn write_stream(path: &Path, events: &[Event]) -> Result<(), EngineError> {
    let file = BufWriter::new(File::create(path)?);
    if is_ndjson(path) {
        write_stream_ndjson(file, events)
    } else {
        write_stream_csv(file, events)
    }
}

/// `partition,index,timestamp`.
pub fn write_detections_csv(writer: impl Write, log: &DetectionLog) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["partition", "index", "timestamp"])?;
    for d in &log.entries {
        w.write_record([
            d.partition.to_string(),
            d.index.to_string(),
            d.timestamp.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `partition,index,start,end,probability,correct`; the last column is
/// empty when no verdicts are given.
pub fn write_forecasts_csv(
    writer: impl Write,
    log: &ForecastLog,
    verdicts: Option<&[bool]>,
) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "partition",
        "index",
        "start",
        "end",
        "probability",
        "correct",
    ])?;
    for (i, f) in log.entries.iter().enumerate() {
        let verdict = verdicts
            .and_then(|v| v.get(i))
            .map(|c| c.to_string())
            .unwrap_or_default();
        w.write_record([
            f.partition.to_string(),
            f.index.to_string(),
            f.start.to_string(),
            f.end.to_string(),
            f.probability.to_string(),
            verdict,
        ])?;
    }
    w.flush()?;
    Ok(())
}
