//! Event CSV files, JSON sidecars and chain exports.
//!
//! Events are stored as CSV with the header `time,dim` (ascending times,
//! zero-based dimensions). Horizon and dimension come from an explicit
//! override, else from a `<stem>.json` sidecar, else they are inferred as
//! `T = max time` and `K = max dim + 1`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use mhp_core::{EventSequence, HawkesError, HawkesParams, Matrix, SampleChain, ScenarioKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: time {time} precedes the previous event")]
    Unsorted { line: u64, time: f64 },
    #[error("line {line}: dimension {dim} is out of range for K = {k}")]
    DimensionOutOfRange { line: u64, dim: usize, k: usize },
    #[error("line {line}: {source}")]
    Event { line: u64, source: HawkesError },
    #[error(transparent)]
    Invalid(#[from] HawkesError),
    #[error("{path}: {source}")]
    Sidecar {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Horizon and dimension overrides for ingestion.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Shape {
    pub horizon: Option<f64>,
    pub dimension: Option<usize>,
}

/// What was read.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IngestReport {
    pub n: usize,
    pub counts: Vec<usize>,
    pub horizon: f64,
    pub dimension: usize,
}

impl IngestReport {
    pub fn of(seq: &EventSequence) -> Self {
        IngestReport {
            n: seq.len(),
            counts: seq.counts().to_vec(),
            horizon: seq.horizon(),
            dimension: seq.dimension(),
        }
    }
}

/// Metadata written next to simulated events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub horizon: f64,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<HawkesParams>,
    /// `true` where the true excitation is non-zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Matrix<bool>>,
}

impl Sidecar {
    pub fn for_simulation(
        seq: &EventSequence,
        params: &HawkesParams,
        scenario: Option<ScenarioKind>,
        seed: u64,
    ) -> Self {
        Sidecar {
            horizon: seq.horizon(),
            dimension: seq.dimension(),
            seed: Some(seed),
            scenario,
            params: Some(params.clone()),
            mask: Some(params.alpha.map(|&a| a != 0.0)),
        }
    }
}

/// `events.csv` -> `events.json`.
pub fn sidecar_path(events: &Path) -> PathBuf {
    events.with_extension("json")
}

#[derive(Deserialize)]
struct Row {
    time: String,
    dim: String,
}

/// Parses event CSV. Line numbers in errors count the header as line 1.
pub fn parse_events<R: Read>(reader: R, shape: Shape) -> Result<EventSequence, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| IngestError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "dim" {
        return Err(IngestError::Malformed {
            line: 1,
            message: format!(
                "expected header `time,dim`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut times = Vec::new();
    let mut dims = Vec::new();
    let mut lines = Vec::new();
    for record in csv.deserialize::<Row>() {
        let row = record.map_err(|e| IngestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = times.len() as u64 + 2;
        let time: f64 = row.time.parse().map_err(|_| IngestError::Malformed {
            line,
            message: format!("time {:?} is not a number", row.time),
        })?;
        let dim: usize = row.dim.parse().map_err(|_| IngestError::Malformed {
            line,
            message: format!("dim {:?} is not a non-negative integer", row.dim),
        })?;
        if !time.is_finite() || time < 0.0 {
            return Err(IngestError::Malformed {
                line,
                message: format!("time {time} is not a finite non-negative number"),
            });
        }
        if let Some(&prev) = times.last() {
            if time < prev {
                return Err(IngestError::Unsorted { line, time });
            }
        }
        if let Some(k) = shape.dimension {
            if dim >= k {
                return Err(IngestError::DimensionOutOfRange { line, dim, k });
            }
        }
        times.push(time);
        dims.push(dim);
        lines.push(line);
    }
    let k = shape
        .dimension
        .unwrap_or_else(|| dims.iter().max().map_or(1, |d| d + 1));
    let horizon = shape
        .horizon
        .unwrap_or_else(|| times.last().copied().unwrap_or(0.0));
    EventSequence::new(times, dims, horizon, k).map_err(|e| match e {
        HawkesError::NonFiniteTime { index, .. }
        | HawkesError::UnsortedTimes { index, .. }
        | HawkesError::DuplicateEvent { index, .. }
        | HawkesError::OutOfHorizon { index, .. }
        | HawkesError::DimensionOutOfRange { index, .. } => IngestError::Event {
            line: lines[index],
            source: e,
        },
        other => IngestError::Invalid(other),
    })
}

/// Reads events from `path`, filling unset overrides from the sidecar.
pub fn read_events(path: &Path, shape: Shape) -> Result<EventSequence, IngestError> {
    let mut shape = shape;
    let side = sidecar_path(path);
    if side.exists() && (shape.horizon.is_none() || shape.dimension.is_none()) {
        let meta: Sidecar = read_json(&side)?;
        shape.horizon = shape.horizon.or(Some(meta.horizon));
        shape.dimension = shape.dimension.or(Some(meta.dimension));
    }
    let file = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_events(std::io::BufReader::new(file), shape)
}

pub fn write_events(path: &Path, seq: &EventSequence) -> Result<(), IngestError> {
    let io = |source| IngestError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = String::with_capacity(16 * seq.len() + 16);
    out.push_str("time,dim\n");
    for (t, d) in seq.iter() {
        out.push_str(&format!("{t},{d}\n"));
    }
    create_parent(path).map_err(io)?;
    fs::write(path, out).map_err(io)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IngestError::Sidecar {
        path: path.to_owned(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IngestError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IngestError::Sidecar {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    create_parent(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

/// One row per stored draw: `iteration`, `burn_in` flag, then the flattened
/// log-parameters.
pub fn write_chain_csv<W: Write>(writer: W, chain: &SampleChain) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["iteration".to_string(), "burn_in".to_string()];
    header.extend(chain.column_names());
    w.write_record(&header)?;
    for (i, (it, draw)) in chain.iterations.iter().zip(&chain.draws).enumerate() {
        let mut row = vec![it.to_string(), u8::from(i < chain.burn_in).to_string()];
        row.extend(draw.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn create_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p),
        _ => Ok(()),
    }
}
