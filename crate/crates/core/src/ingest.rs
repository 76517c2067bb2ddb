//! Log ingestion in the published dataset layout.
//!
//! Files are comma-separated UTF-8 with a header. Booleans are `0`/`1`.
//! Besides the six engagement signals and the `young_adult` attribute the
//! toolkit reads a `traffic` column (`default` or `random`) and an optional
//! ISO-8601 `date` column. A file without a `traffic` column can be read
//! with a per-file traffic flag instead.
//!
//! Rows that fail to parse are collected as rejects with their line number;
//! the rest of the file is still read.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use csv::{ByteRecord, ReaderBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EngagementSignals, GroupTally, TrafficRecord, TrafficSource};

/// Groups induced by the binary sensitive attribute.
pub const GROUPS: usize = 2;

/// Group index for a `young_adult` value: young adults are group 0.
pub fn young_adult_group(young_adult: bool) -> usize {
    if young_adult {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub signal_columns: [String; 6],
    /// Binary sensitive attribute; `1` maps to group 0.
    pub sensitive_column: String,
    pub traffic_column: String,
    pub date_column: String,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        DatasetSchema {
            signal_columns: EngagementSignals::NAMES.map(String::from),
            sensitive_column: "young_adult".into(),
            traffic_column: "traffic".into(),
            date_column: "date".into(),
        }
    }
}

impl DatasetSchema {
    fn known(&self, name: &str) -> bool {
        self.signal_columns.iter().any(|c| c == name)
            || name == self.sensitive_column
            || name == self.traffic_column
            || name == self.date_column
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadOptions {
    /// Traffic source for every row of a file without a traffic column. A
    /// traffic column, when present, takes precedence.
    pub traffic: Option<TrafficSource>,
    /// Fail when the date column is absent.
    pub require_date: bool,
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub path: PathBuf,
    pub line: u64,
    pub code: String,
    pub message: String,
}

impl std::fmt::Display for RejectedRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}: [{}] {}",
            self.path.display(),
            self.line,
            self.code,
            self.message
        )
    }
}

struct Columns {
    signals: [usize; 6],
    sensitive: usize,
    traffic: Option<usize>,
    date: Option<usize>,
    width: usize,
}

/// Streaming reader yielding one record or reject per data row.
pub struct LogReader<R: Read> {
    inner: csv::Reader<R>,
    path: PathBuf,
    cols: Columns,
    names: Vec<String>,
    fixed: Option<TrafficSource>,
    buf: ByteRecord,
}

impl LogReader<File> {
    pub fn open(path: &Path, schema: &DatasetSchema, opts: ReadOptions) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        LogReader::from_reader(file, path, schema, opts)
    }
}

impl<R: Read> LogReader<R> {
    /// `path` only labels errors and rejects.
    pub fn from_reader(reader: R, path: &Path, schema: &DatasetSchema, opts: ReadOptions) -> Result<Self> {
        let mut inner = ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = inner.headers()?.clone();
        let names: Vec<String> = header.iter().map(String::from).collect();
        let missing = |column: &str, hint: &str| Error::MissingColumn {
            path: path.to_path_buf(),
            column: column.to_string(),
            hint: hint.to_string(),
        };
        if let Some(unknown) = names.iter().find(|n| !schema.known(n)) {
            return Err(Error::UnknownColumn {
                path: path.to_path_buf(),
                column: unknown.clone(),
            });
        }
        let find = |name: &str| names.iter().position(|n| n == name);
        let mut signals = [0usize; 6];
        for (slot, name) in signals.iter_mut().zip(&schema.signal_columns) {
            *slot = find(name).ok_or_else(|| missing(name, "every engagement signal column is required"))?;
        }
        let sensitive = find(&schema.sensitive_column)
            .ok_or_else(|| missing(&schema.sensitive_column, "the sensitive attribute column is required"))?;
        let traffic = find(&schema.traffic_column);
        if traffic.is_none() && opts.traffic.is_none() {
            return Err(missing(
                &schema.traffic_column,
                "add the column or pass the traffic source of the whole file",
            ));
        }
        let date = find(&schema.date_column);
        if date.is_none() && opts.require_date {
            return Err(missing(
                &schema.date_column,
                "daily partitioning needs an ISO-8601 date per row",
            ));
        }
        Ok(LogReader {
            inner,
            path: path.to_path_buf(),
            cols: Columns {
                signals,
                sensitive,
                traffic,
                date,
                width: names.len(),
            },
            names,
            fixed: opts.traffic,
            buf: ByteRecord::new(),
        })
    }

    fn reject(&self, line: u64, err: Error) -> RejectedRow {
        RejectedRow {
            path: self.path.clone(),
            line,
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }

    fn parse_error(&self, line: u64, col: usize, message: String) -> Error {
        Error::Parse {
            line,
            column: self.names[col].clone(),
            message,
        }
    }

    fn flag(&self, line: u64, col: usize) -> Result<bool> {
        match &self.buf[col] {
            b"0" => Ok(false),
            b"1" => Ok(true),
            other => Err(self.parse_error(
                line,
                col,
                format!("expected 0 or 1, found `{}`", String::from_utf8_lossy(other)),
            )),
        }
    }

    fn parse_row(&self, line: u64) -> Result<TrafficRecord> {
        if self.buf.len() != self.cols.width {
            return Err(Error::Schema {
                row: line,
                message: format!("expected {} fields, found {}", self.cols.width, self.buf.len()),
            });
        }
        let mut s = [false; 6];
        for (v, &col) in s.iter_mut().zip(&self.cols.signals) {
            *v = self.flag(line, col)?;
        }
        let group = young_adult_group(self.flag(line, self.cols.sensitive)?);
        let source = match self.cols.traffic {
            Some(col) => match &self.buf[col] {
                b"default" => TrafficSource::Default,
                b"random" => TrafficSource::Random,
                other => {
                    return Err(self.parse_error(
                        line,
                        col,
                        format!(
                            "expected `default` or `random`, found `{}`",
                            String::from_utf8_lossy(other)
                        ),
                    ))
                }
            },
            None => self.fixed.expect("checked when the header was read"),
        };
        let mut record = TrafficRecord::from_signals(source, EngagementSignals::from_array(s), group);
        if let Some(col) = self.cols.date {
            let text = std::str::from_utf8(&self.buf[col])
                .map_err(|_| self.parse_error(line, col, "date is not valid UTF-8".into()))?;
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .map_err(|e| self.parse_error(line, col, format!("invalid date `{text}`: {e}")))?;
            record = record.with_date(date);
        }
        Ok(record)
    }
}

impl<R: Read> Iterator for LogReader<R> {
    type Item = std::result::Result<TrafficRecord, RejectedRow>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = std::mem::take(&mut self.buf);
        let read = self.inner.read_byte_record(&mut buf);
        self.buf = buf;
        match read {
            Ok(false) => None,
            Ok(true) => {
                let line = self.buf.position().map_or(0, |p| p.line());
                Some(self.parse_row(line).map_err(|e| self.reject(line, e)))
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Some(Err(self.reject(line, Error::Csv(e))))
            }
        }
    }
}

/// Aggregate of one or more files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub tally: GroupTally,
    pub rows: u64,
    pub rejected: Vec<RejectedRow>,
}

impl IngestOutcome {
    fn empty() -> Self {
        IngestOutcome {
            tally: GroupTally::new(GROUPS).expect("GROUPS is positive"),
            rows: 0,
            rejected: Vec::new(),
        }
    }

    pub fn merge(mut self, other: IngestOutcome) -> Result<Self> {
        self.tally = self.tally.merge(&other.tally)?;
        self.rows += other.rows;
        self.rejected.extend(other.rejected);
        Ok(self)
    }
}

/// Tallies one file in a single pass.
pub fn ingest_file(path: &Path, schema: &DatasetSchema, opts: ReadOptions) -> Result<IngestOutcome> {
    let mut out = IngestOutcome::empty();
    for row in LogReader::open(path, schema, opts)? {
        out.rows += 1;
        match row {
            Ok(r) => out.tally.push(&r),
            Err(rej) => out.rejected.push(rej),
        }
    }
    Ok(out)
}

/// Tallies several files in parallel and merges the results in input order.
pub fn ingest_files(files: &[(PathBuf, ReadOptions)], schema: &DatasetSchema) -> Result<IngestOutcome> {
    let parts = files
        .par_iter()
        .map(|(path, opts)| ingest_file(path, schema, *opts))
        .collect::<Result<Vec<_>>>()?;
    parts.into_iter().try_fold(IngestOutcome::empty(), IngestOutcome::merge)
}

/// How random traffic is matched to monitored days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomTrafficPolicy {
    /// All random rows, whatever their date, serve every day.
    #[default]
    Shared,
    /// Each day uses only random rows of the same date.
    PerDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTallies {
    pub default: GroupTally,
    pub random: GroupTally,
}

impl DayTallies {
    /// Default traffic of the day joined with its random traffic.
    pub fn combined(&self) -> Result<GroupTally> {
        self.default.with_random_from(&self.random)
    }
}

/// Groups records into per-day tallies keyed by the dates of default rows.
pub fn partition_daily<I>(records: I, k: usize, policy: RandomTrafficPolicy) -> Result<BTreeMap<NaiveDate, DayTallies>>
where
    I: IntoIterator<Item = TrafficRecord>,
{
    let mut default: BTreeMap<NaiveDate, GroupTally> = BTreeMap::new();
    let mut random_by_day: BTreeMap<NaiveDate, GroupTally> = BTreeMap::new();
    let mut shared = GroupTally::new(k)?;
    for (row, r) in records.into_iter().enumerate() {
        r.validate(k, row as u64)?;
        let date = r.date;
        match (r.source, policy, date) {
            (TrafficSource::Random, RandomTrafficPolicy::Shared, _) => shared.push(&r),
            (_, _, Some(d)) => {
                let map = match r.source {
                    TrafficSource::Default => &mut default,
                    TrafficSource::Random => &mut random_by_day,
                };
                match map.get_mut(&d) {
                    Some(t) => t.push(&r),
                    None => {
                        let mut t = GroupTally::new(k)?;
                        t.push(&r);
                        map.insert(d, t);
                    }
                }
            }
            (_, _, None) => {
                return Err(Error::InvalidConfig(format!(
                    "record {row} ({:?} traffic) has no date; daily partitioning needs one",
                    r.source
                )))
            }
        }
    }
    let mut out = BTreeMap::new();
    for (day, d) in default {
        let random = match policy {
            RandomTrafficPolicy::Shared => shared.clone(),
            RandomTrafficPolicy::PerDay => match random_by_day.remove(&day) {
                Some(t) if t.n_rand > 0 => t,
                _ => return Err(Error::InsufficientRandomTraffic(format!("day {day}: no random rows"))),
            },
        };
        out.insert(day, DayTallies { default: d, random });
    }
    Ok(out)
}

/// Writes records in the ingest layout. Records without raw signals encode a
/// positive label as `like_video = 1`. Only two groups can be written.
pub fn write_log<W: Write>(writer: W, records: &[TrafficRecord], with_date: bool) -> Result<()> {
    let schema = DatasetSchema::default();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.signal_columns.iter().map(String::as_str).collect();
    header.push(&schema.sensitive_column);
    header.push(&schema.traffic_column);
    if with_date {
        header.push(&schema.date_column);
    }
    w.write_record(&header)?;
    let bit = |b: bool| if b { "1" } else { "0" };
    for (row, r) in records.iter().enumerate() {
        r.validate(GROUPS, row as u64)?;
        let signals = r.signals.unwrap_or(EngagementSignals::from_array([
            r.label, false, false, false, false, false,
        ]));
        let mut fields: Vec<String> = signals.to_array().iter().map(|&s| bit(s).to_string()).collect();
        fields.push(bit(r.group == 0).to_string());
        fields.push(match r.source {
            TrafficSource::Default => "default".into(),
            TrafficSource::Random => "random".into(),
        });
        if with_date {
            let d = r
                .date
                .ok_or_else(|| Error::InvalidConfig(format!("record {row} has no date")))?;
            fields.push(d.format("%Y-%m-%d").to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}
