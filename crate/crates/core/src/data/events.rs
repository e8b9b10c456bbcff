//! Labelled learner×fragment events and their JSONL / CSV encodings.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::models::{EventTopics, Topic};

/// One learner×fragment interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub learner_id: String,
    pub event_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub fragment_id: String,
    pub topics: EventTopics,
    pub watch_ratio: f64,
    pub label: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireTopic {
    kc_id: String,
    coverage: f64,
    rank: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEvent {
    learner_id: String,
    event_id: String,
    timestamp: i64,
    fragment_id: String,
    topics: Vec<WireTopic>,
    watch_ratio: f64,
}

impl EventRecord {
    /// Serializes in the `events.jsonl` wire format (the label is not stored;
    /// it is recomputed from `watch_ratio` at ingest).
    pub fn to_json_line(&self) -> String {
        let wire = WireEvent {
            learner_id: self.learner_id.clone(),
            event_id: self.event_id.clone(),
            timestamp: self.timestamp,
            fragment_id: self.fragment_id.clone(),
            topics: self
                .topics
                .iter()
                .enumerate()
                .map(|(i, t)| WireTopic {
                    kc_id: t.kc_id.clone(),
                    coverage: t.depth,
                    rank: i as u32 + 1,
                })
                .collect(),
            watch_ratio: self.watch_ratio,
        };
        serde_json::to_string(&wire).expect("events always serialize")
    }
}

/// Engaged iff `watch_ratio ≥ threshold`. Ratios above 1 (rewatching) count
/// as engaged.
pub fn binarize_label(watch_ratio: f64, threshold: f64) -> Result<bool, DataError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DataError::InvalidThreshold(threshold));
    }
    if !(watch_ratio >= 0.0 && watch_ratio.is_finite()) {
        return Err(DataError::InvalidRatio(watch_ratio));
    }
    Ok(watch_ratio >= threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Jsonl,
    Csv,
}

impl EventFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub label_threshold: f64,
    /// Events with more topics than this are rejected.
    pub max_topics: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            label_threshold: 0.75,
            max_topics: 5,
        }
    }
}

/// A line that could not be turned into an [`EventRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordError {
    pub line_no: u64,
    pub reason: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line_no, self.reason)
    }
}

/// Out-of-order timestamp within one learner's events.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderWarning {
    pub line_no: u64,
    pub learner_id: String,
    pub timestamp: i64,
    pub previous: i64,
}

impl fmt::Display for OrderWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}: learner `{}` timestamp {} precedes earlier {}",
            self.line_no, self.learner_id, self.timestamp, self.previous
        )
    }
}

fn build_record(wire: WireEvent, opts: &ParseOptions) -> Result<EventRecord, String> {
    if wire.topics.is_empty() {
        return Err("event has no topics".into());
    }
    if wire.topics.len() > opts.max_topics {
        return Err(format!(
            "event has {} topics, at most {} allowed",
            wire.topics.len(),
            opts.max_topics
        ));
    }
    let mut topics = wire.topics;
    topics.sort_by_key(|t| t.rank);
    if topics.windows(2).any(|w| w[0].rank == w[1].rank) {
        return Err("duplicate topic rank".into());
    }
    let topics = EventTopics::new(
        topics
            .into_iter()
            .map(|t| Topic::new(t.kc_id, t.coverage))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let label = binarize_label(wire.watch_ratio, opts.label_threshold).map_err(|e| e.to_string())?;
    Ok(EventRecord {
        learner_id: wire.learner_id,
        event_id: wire.event_id,
        timestamp: wire.timestamp,
        fragment_id: wire.fragment_id,
        topics,
        watch_ratio: wire.watch_ratio,
        label,
    })
}

fn parse_csv_topics(field: &str) -> Result<Vec<WireTopic>, String> {
    field
        .split('|')
        .filter(|s| !s.trim().is_empty())
        .enumerate()
        .map(|(i, pair)| {
            let (kc, cov) = pair
                .rsplit_once(':')
                .ok_or_else(|| format!("topic `{pair}` is not kc:coverage"))?;
            let coverage = cov
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("coverage `{cov}`: {e}"))?;
            Ok(WireTopic {
                kc_id: kc.trim().to_string(),
                coverage,
                rank: i as u32 + 1,
            })
        })
        .collect()
}

const CSV_COLUMNS: [&str; 6] = [
    "learner_id",
    "event_id",
    "timestamp",
    "fragment_id",
    "topics",
    "watch_ratio",
];

fn csv_record_to_wire(rec: &csv::StringRecord, columns: &[usize; 6]) -> Result<WireEvent, String> {
    let field = |i: usize| {
        rec.get(columns[i])
            .ok_or_else(|| format!("missing column `{}`", CSV_COLUMNS[i]))
    };
    let parse_num = |i: usize| -> Result<f64, String> {
        let raw = field(i)?;
        raw.trim()
            .parse::<f64>()
            .map_err(|e| format!("{} `{raw}`: {e}", CSV_COLUMNS[i]))
    };
    let ts_raw = field(2)?;
    Ok(WireEvent {
        learner_id: field(0)?.to_string(),
        event_id: field(1)?.to_string(),
        timestamp: ts_raw
            .trim()
            .parse::<i64>()
            .map_err(|e| format!("timestamp `{ts_raw}`: {e}"))?,
        fragment_id: field(3)?.to_string(),
        topics: parse_csv_topics(field(4)?)?,
        watch_ratio: if field(5)?.trim().is_empty() {
            return Err("missing field `watch_ratio`".into());
        } else {
            parse_num(5)?
        },
    })
}

/// Records newline offsets as the CSV parser pulls bytes, so that a record's
/// starting byte can be mapped back to its physical line (the parser's own
/// line counter skips blank lines).
#[derive(Default)]
struct NewlineIndex {
    /// Newlines already folded into `base`.
    base: u64,
    offsets: std::collections::VecDeque<u64>,
}

impl NewlineIndex {
    fn line_of(&mut self, mut byte: u64) -> u64 {
        while self.offsets.front().is_some_and(|&o| o < byte) {
            self.offsets.pop_front();
            self.base += 1;
        }
        // a record position may point at blank lines preceding it
        while self.offsets.front() == Some(&byte) {
            self.offsets.pop_front();
            self.base += 1;
            byte += 1;
        }
        self.base + 1
    }
}

struct CountingReader<R> {
    inner: R,
    pos: u64,
    index: std::rc::Rc<std::cell::RefCell<NewlineIndex>>,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        let mut index = self.index.borrow_mut();
        for (i, b) in buf[..n].iter().enumerate() {
            if *b == b'\n' {
                index.offsets.push_back(self.pos + i as u64);
            }
        }
        self.pos += n as u64;
        Ok(n)
    }
}

enum Source<R: Read> {
    Jsonl {
        lines: std::io::Lines<BufReader<R>>,
        line_no: u64,
    },
    Csv {
        records: csv::StringRecordsIntoIter<CountingReader<R>>,
        lines: std::rc::Rc<std::cell::RefCell<NewlineIndex>>,
        columns: Option<[usize; 6]>,
        header_error: Option<String>,
    },
}

/// Single-consumer stream of validated events.
///
/// Yields one item per non-blank input line (JSONL) or data record (CSV):
/// either a record or the reason it was rejected. An I/O failure ends the
/// stream and is available from [`EventStream::io_error`].
pub struct EventStream<R: Read> {
    source: Source<R>,
    opts: ParseOptions,
    last_seen: HashMap<String, i64>,
    warnings: Vec<OrderWarning>,
    io_error: Option<std::io::Error>,
}

impl<R: Read> EventStream<R> {
    pub fn new(reader: R, format: EventFormat, opts: ParseOptions) -> Self {
        let source = match format {
            EventFormat::Jsonl => Source::Jsonl {
                lines: BufReader::new(reader).lines(),
                line_no: 0,
            },
            EventFormat::Csv => {
                let lines = std::rc::Rc::new(std::cell::RefCell::new(NewlineIndex::default()));
                let reader = CountingReader {
                    inner: reader,
                    pos: 0,
                    index: lines.clone(),
                };
                let mut rdr = csv::ReaderBuilder::new()
                    .has_headers(true)
                    .flexible(true)
                    .from_reader(reader);
                let (columns, header_error) = match rdr.headers() {
                    Ok(h) => {
                        let find = |name: &str| h.iter().position(|c| c.trim() == name);
                        let mut cols = [0usize; 6];
                        let mut missing = Vec::new();
                        for (i, name) in CSV_COLUMNS.iter().enumerate() {
                            match find(name) {
                                Some(p) => cols[i] = p,
                                None => missing.push(*name),
                            }
                        }
                        if missing.is_empty() || h.is_empty() {
                            (Some(cols), None)
                        } else {
                            (None, Some(format!("CSV header lacks columns {missing:?}")))
                        }
                    }
                    Err(e) => (None, Some(e.to_string())),
                };
                Source::Csv {
                    records: rdr.into_records(),
                    lines,
                    columns,
                    header_error,
                }
            }
        };
        Self {
            source,
            opts,
            last_seen: HashMap::new(),
            warnings: Vec::new(),
            io_error: None,
        }
    }

    pub fn warnings(&self) -> &[OrderWarning] {
        &self.warnings
    }

    pub fn io_error(&self) -> Option<&std::io::Error> {
        self.io_error.as_ref()
    }

    fn check_order(&mut self, line_no: u64, rec: &EventRecord) {
        if let Some(&prev) = self.last_seen.get(&rec.learner_id) {
            if rec.timestamp < prev {
                self.warnings.push(OrderWarning {
                    line_no,
                    learner_id: rec.learner_id.clone(),
                    timestamp: rec.timestamp,
                    previous: prev,
                });
                return;
            }
        }
        self.last_seen.insert(rec.learner_id.clone(), rec.timestamp);
    }

    fn next_raw(&mut self) -> Option<(u64, Result<EventRecord, String>)> {
        let opts = self.opts;
        match &mut self.source {
            Source::Jsonl { lines, line_no } => loop {
                let line = match lines.next()? {
                    Ok(l) => l,
                    Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                        *line_no += 1;
                        return Some((*line_no, Err(format!("invalid UTF-8: {e}"))));
                    }
                    Err(e) => {
                        self.io_error = Some(e);
                        return None;
                    }
                };
                *line_no += 1;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<WireEvent>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(|w| build_record(w, &opts));
                return Some((*line_no, parsed));
            },
            Source::Csv {
                records,
                lines,
                columns,
                header_error,
            } => {
                let rec = records.next()?;
                match rec {
                    Err(e) => {
                        let line = e.position().map_or(0, |p| lines.borrow_mut().line_of(p.byte()));
                        if let csv::ErrorKind::Io(_) = e.kind() {
                            if let csv::ErrorKind::Io(io) = e.into_kind() {
                                self.io_error = Some(io);
                            }
                            return None;
                        }
                        Some((line, Err(e.to_string())))
                    }
                    Ok(r) => {
                        let line = r.position().map_or(0, |p| lines.borrow_mut().line_of(p.byte()));
                        let parsed = match (columns, header_error) {
                            (Some(cols), _) => csv_record_to_wire(&r, cols).and_then(|w| build_record(w, &opts)),
                            (None, Some(msg)) => Err(msg.clone()),
                            (None, None) => Err("unreadable CSV header".into()),
                        };
                        Some((line, parsed))
                    }
                }
            }
        }
    }
}

impl<R: Read> Iterator for EventStream<R> {
    type Item = Result<EventRecord, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        let (line_no, parsed) = self.next_raw()?;
        Some(match parsed {
            Ok(rec) => {
                self.check_order(line_no, &rec);
                Ok(rec)
            }
            Err(reason) => Err(RecordError { line_no, reason }),
        })
    }
}

/// Everything read from one events file.
#[derive(Debug, Default)]
pub struct ParsedEvents {
    pub records: Vec<EventRecord>,
    pub errors: Vec<RecordError>,
    pub warnings: Vec<OrderWarning>,
}

pub fn parse_events<R: Read>(
    reader: R,
    format: EventFormat,
    opts: ParseOptions,
) -> Result<ParsedEvents, DataError> {
    let mut stream = EventStream::new(reader, format, opts);
    let mut out = ParsedEvents::default();
    for item in stream.by_ref() {
        match item {
            Ok(r) => out.records.push(r),
            Err(e) => out.errors.push(e),
        }
    }
    if let Some(e) = stream.io_error.take() {
        return Err(DataError::UnreadableSource(e.to_string()));
    }
    out.warnings = stream.warnings;
    Ok(out)
}
