//! Cluster-usage trace ingestion and the canonical interval-aligned series.
//!
//! Raw usage tables (one row per machine sample) are read through a [`Schema`]
//! that maps feature names to CSV columns. Records are then averaged into
//! fixed-width time buckets and gaps are forward-filled, producing a
//! [`TraceSeries`] whose timestamps are uniformly spaced.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One usage sample for one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub machine_id: String,
    /// Seconds since the trace epoch.
    pub timestamp: i64,
    /// Values in schema feature order.
    pub features: Vec<f64>,
}

/// Column layout of a usage table.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub name: String,
    pub machine_column: usize,
    pub timestamp_column: usize,
    /// Raw timestamps are divided (floor) by this to obtain seconds.
    pub timestamp_divisor: i64,
    pub header_lines: usize,
    /// (feature name, column index), in output order.
    pub features: Vec<(String, usize)>,
    /// Name of the predicted feature.
    pub target: String,
}

impl Schema {
    /// `machine_usage.csv` of the 2018 Alibaba cluster trace.
    pub fn alibaba() -> Self {
        Schema {
            name: "alibaba".into(),
            machine_column: 0,
            timestamp_column: 1,
            timestamp_divisor: 1,
            header_lines: 0,
            features: vec![
                ("cpu_util_percent".into(), 2),
                ("mem_util_percent".into(), 3),
                ("net_in".into(), 6),
                ("net_out".into(), 7),
                ("disk_io_percent".into(), 8),
            ],
            target: "cpu_util_percent".into(),
        }
    }

    /// `task_usage` table of the 2011 Google cluster trace (microsecond timestamps).
    pub fn google() -> Self {
        Schema {
            name: "google".into(),
            machine_column: 4,
            timestamp_column: 0,
            timestamp_divisor: 1_000_000,
            header_lines: 0,
            features: vec![
                ("cpu_rate".into(), 5),
                ("canonical_memory_usage".into(), 6),
                ("assigned_memory_usage".into(), 7),
                ("total_page_cache".into(), 9),
            ],
            target: "cpu_rate".into(),
        }
    }

    pub fn preset(id: &str) -> Option<Self> {
        match id {
            "alibaba" => Some(Self::alibaba()),
            "google" => Some(Self::google()),
            _ => None,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn target_index(&self) -> Result<usize> {
        self.features
            .iter()
            .position(|(n, _)| *n == self.target)
            .ok_or_else(|| Error::invalid(format!("target '{}' is not a schema feature", self.target)))
    }

    /// Parses the key-value schema format:
    ///
    /// ```text
    /// name = alibaba
    /// machine_column = 0
    /// timestamp_column = 1
    /// timestamp_divisor = 1
    /// header_lines = 0
    /// feature = cpu_util_percent:2
    /// target = cpu_util_percent
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema {
            name: String::new(),
            machine_column: 0,
            timestamp_column: 1,
            timestamp_divisor: 1,
            header_lines: 0,
            features: Vec::new(),
            target: String::new(),
        };
        let bad = |line: usize, message: String| Error::Parse {
            line: line as u64 + 1,
            message,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(i, format!("expected key = value, got '{line}'")))?;
            let int = |v: &str| -> Result<usize> {
                v.parse().map_err(|_| bad(i, format!("'{v}' is not a non-negative integer")))
            };
            match key {
                "name" => schema.name = value.to_string(),
                "machine_column" => schema.machine_column = int(value)?,
                "timestamp_column" => schema.timestamp_column = int(value)?,
                "timestamp_divisor" => {
                    let d = int(value)? as i64;
                    if d == 0 {
                        return Err(bad(i, "timestamp_divisor must be positive".into()));
                    }
                    schema.timestamp_divisor = d;
                }
                "header_lines" => schema.header_lines = int(value)?,
                "feature" => {
                    let (name, col) = value
                        .rsplit_once(':')
                        .ok_or_else(|| bad(i, format!("feature must be name:column, got '{value}'")))?;
                    schema.features.push((name.trim().to_string(), int(col.trim())?));
                }
                "target" => schema.target = value.to_string(),
                other => return Err(bad(i, format!("unknown key '{other}'"))),
            }
        }
        if schema.features.is_empty() {
            return Err(Error::Format {
                what: "schema",
                message: "no features declared".into(),
            });
        }
        if schema.target.is_empty() {
            schema.target = schema.features[0].0.clone();
        }
        schema.target_index()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Output of [`load_trace`]: surviving records plus the drop count.
#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub feature_names: Vec<String>,
    pub target_index: usize,
    pub records: Vec<TraceRecord>,
    /// Rows skipped because a mapped column was empty.
    pub dropped: usize,
}

impl LoadedTrace {
    pub fn for_machine(&self, machine_id: &str) -> Result<LoadedTrace> {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.machine_id == machine_id)
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(Error::invalid(format!("no records for machine '{machine_id}'")));
        }
        Ok(LoadedTrace {
            records,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> LoadedTrace {
        LoadedTrace {
            feature_names: self.feature_names.clone(),
            target_index: self.target_index,
            records: Vec::new(),
            dropped: self.dropped,
        }
    }
}

pub fn load_trace(path: &Path, schema: &Schema) -> Result<LoadedTrace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(BufReader::new(file), schema)
}

/// Parses usage rows from any reader. Rows with an empty value in any mapped
/// column are dropped and counted; unparseable numbers are errors.
pub fn parse_trace<R: Read>(reader: R, schema: &Schema) -> Result<LoadedTrace> {
    let target_index = schema.target_index()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width_needed = schema
        .features
        .iter()
        .map(|(_, c)| *c)
        .chain([schema.machine_column, schema.timestamp_column])
        .max()
        .unwrap_or(0)
        + 1;

    let mut records = Vec::new();
    let mut dropped = 0usize;
    let mut row = csv::StringRecord::new();
    let mut index = 0usize;
    loop {
        let more = rdr.read_record(&mut row).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        index += 1;
        if index <= schema.header_lines {
            continue;
        }
        let line = row.position().map_or(index as u64, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() < width_needed {
            return Err(Error::Parse {
                line,
                message: format!("row has {} columns, schema needs {width_needed}", row.len()),
            });
        }
        let mapped_empty = schema.features.iter().any(|(_, c)| row[*c].is_empty())
            || row[schema.timestamp_column].is_empty();
        if mapped_empty {
            dropped += 1;
            continue;
        }
        let raw_ts: i64 = row[schema.timestamp_column].parse().map_err(|_| Error::Parse {
            line,
            message: format!("timestamp '{}' is not an integer", &row[schema.timestamp_column]),
        })?;
        if raw_ts < 0 {
            return Err(Error::Parse {
                line,
                message: format!("negative timestamp {raw_ts}"),
            });
        }
        let mut features = Vec::with_capacity(schema.features.len());
        for (name, col) in &schema.features {
            let cell = &row[*col];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{name}: '{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("{name}: non-finite value '{cell}'"),
                });
            }
            features.push(v);
        }
        records.push(TraceRecord {
            machine_id: row[schema.machine_column].to_string(),
            timestamp: raw_ts.div_euclid(schema.timestamp_divisor),
            features,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput { dropped });
    }
    Ok(LoadedTrace {
        feature_names: schema.feature_names(),
        target_index,
        records,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub timestamp: i64,
    /// Feature vector; `NaN` marks a missing cell until [`fill_missing`] runs.
    pub values: Vec<f64>,
}

/// Interval-aligned multivariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub interval_seconds: i64,
    pub feature_names: Vec<String>,
    pub target_index: usize,
    pub points: Vec<Point>,
}

impl TraceSeries {
    pub fn new(interval_seconds: i64, feature_names: Vec<String>, target_index: usize, points: Vec<Point>) -> Result<Self> {
        let s = TraceSeries {
            interval_seconds,
            feature_names,
            target_index,
            points,
        };
        s.check_shape()?;
        Ok(s)
    }

    /// Builds a uniformly spaced series starting at t=0 from row vectors.
    pub fn from_rows(interval_seconds: i64, feature_names: Vec<String>, target_index: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let points = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Point {
                timestamp: i as i64 * interval_seconds,
                values,
            })
            .collect();
        Self::new(interval_seconds, feature_names, target_index, points)
    }

    fn check_shape(&self) -> Result<()> {
        if self.interval_seconds <= 0 {
            return Err(Error::invalid("interval_seconds must be positive"));
        }
        let k = self.feature_names.len();
        if k == 0 {
            return Err(Error::invalid("series needs at least one feature"));
        }
        if self.target_index >= k {
            return Err(Error::invalid(format!("target index {} out of range for {k} features", self.target_index)));
        }
        if let Some(p) = self.points.iter().find(|p| p.values.len() != k) {
            return Err(Error::invalid(format!(
                "point at t={} has {} values, expected {k}",
                p.timestamp,
                p.values.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.values[feature]).collect()
    }

    pub fn with_target(mut self, name: &str) -> Result<Self> {
        self.target_index = self
            .feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("unknown target feature '{name}'")))?;
        Ok(self)
    }

    pub fn prefix(&self, len: usize) -> TraceSeries {
        TraceSeries {
            points: self.points[..len.min(self.points.len())].to_vec(),
            ..self.header()
        }
    }

    pub(crate) fn header(&self) -> TraceSeries {
        TraceSeries {
            interval_seconds: self.interval_seconds,
            feature_names: self.feature_names.clone(),
            target_index: self.target_index,
            points: Vec::new(),
        }
    }

    /// True when timestamps step by exactly one interval and no cell is missing.
    pub fn is_uniform(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].timestamp - w[0].timestamp == self.interval_seconds)
            && self.points.iter().all(|p| p.values.iter().all(|v| !v.is_nan()))
    }

    /// Canonical CSV: a `# interval_seconds=.. target=..` line, a header, then
    /// `timestamp,<features..>` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# interval_seconds={} target={}",
            self.interval_seconds, self.feature_names[self.target_index]
        )?;
        writeln!(w, "timestamp,{}", self.feature_names.join(","))?;
        let mut line = String::new();
        for p in &self.points {
            line.clear();
            write!(line, "{}", p.timestamp).unwrap();
            for v in &p.values {
                write!(line, ",{v}").unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let io_err = |e: std::io::Error| Error::Format {
            what: "series",
            message: e.to_string(),
        };
        let fmt = |message: String| Error::Format { what: "series", message };

        let (_, meta) = lines.next().ok_or_else(|| fmt("empty file".into()))?;
        let meta = meta.map_err(io_err)?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| fmt("missing '# interval_seconds=..' line".into()))?;
        let mut interval = None;
        let mut target = None;
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("interval_seconds", v)) => interval = v.parse::<i64>().ok(),
                Some(("target", v)) => target = Some(v.to_string()),
                _ => {}
            }
        }
        let interval = interval.ok_or_else(|| fmt("interval_seconds missing".into()))?;
        let (_, header) = lines.next().ok_or_else(|| fmt("missing header".into()))?;
        let header = header.map_err(io_err)?;
        let mut cols = header.split(',');
        if cols.next() != Some("timestamp") {
            return Err(fmt("header must start with 'timestamp'".into()));
        }
        let names: Vec<String> = cols.map(str::to_string).collect();
        let mut points = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i as u64 + 1,
                message,
            };
            let mut cells = line.split(',');
            let ts = cells
                .next()
                .and_then(|c| c.trim().parse::<i64>().ok())
                .ok_or_else(|| parse_err("bad timestamp".into()))?;
            let values = cells
                .map(|c| c.trim().parse::<f64>().map_err(|_| parse_err(format!("bad value '{c}'"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(Point { timestamp: ts, values });
        }
        let target_index = match target {
            Some(t) => names
                .iter()
                .position(|n| *n == t)
                .ok_or_else(|| fmt(format!("target '{t}' not in header")))?,
            None => 0,
        };
        TraceSeries::new(interval, names, target_index, points)
    }
}

fn cmp_records(a: &TraceRecord, b: &TraceRecord) -> Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then_with(|| a.machine_id.cmp(&b.machine_id))
        .then_with(|| {
            a.features
                .iter()
                .zip(&b.features)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Averages records into buckets `floor(timestamp / interval)`.
///
/// Records inside a bucket are summed in a canonical order, so output is
/// bit-identical for any permutation of the input.
pub fn aggregate_by_interval(trace: &LoadedTrace, interval_seconds: i64) -> Result<TraceSeries> {
    if interval_seconds <= 0 {
        return Err(Error::invalid("interval_seconds must be positive"));
    }
    if trace.records.is_empty() {
        return Err(Error::invalid("no records to aggregate"));
    }
    let k = trace.feature_names.len();
    if let Some(r) = trace.records.iter().find(|r| r.features.len() != k) {
        return Err(Error::invalid(format!(
            "record for {} at t={} has {} features, expected {k}",
            r.machine_id,
            r.timestamp,
            r.features.len()
        )));
    }
    let mut sorted: Vec<&TraceRecord> = trace.records.iter().collect();
    sorted.sort_by(|a, b| {
        a.timestamp
            .div_euclid(interval_seconds)
            .cmp(&b.timestamp.div_euclid(interval_seconds))
            .then_with(|| cmp_records(a, b))
    });

    let mut points: Vec<Point> = Vec::new();
    let mut sums = vec![0.0; k];
    let mut count = 0usize;
    let mut current: Option<i64> = None;
    let flush = |points: &mut Vec<Point>, bucket: i64, sums: &mut [f64], count: usize| {
        points.push(Point {
            timestamp: bucket * interval_seconds,
            values: sums.iter().map(|s| s / count as f64).collect(),
        });
        sums.iter_mut().for_each(|s| *s = 0.0);
    };
    for r in sorted {
        let bucket = r.timestamp.div_euclid(interval_seconds);
        if current.is_some_and(|c| c != bucket) {
            flush(&mut points, current.unwrap(), &mut sums, count);
            count = 0;
        }
        current = Some(bucket);
        for (s, v) in sums.iter_mut().zip(&r.features) {
            *s += v;
        }
        count += 1;
    }
    flush(&mut points, current.unwrap(), &mut sums, count);

    TraceSeries::new(interval_seconds, trace.feature_names.clone(), trace.target_index, points)
}

/// Inserts absent intervals and replaces missing (`NaN`) cells with the
/// previous slot's value. A missing cell in the first point has no previous
/// slot and is an error.
pub fn fill_missing(series: &TraceSeries) -> Result<TraceSeries> {
    let step = series.interval_seconds;
    let mut out = series.header();
    let Some(first) = series.points.first() else {
        return Ok(out);
    };
    if first.values.iter().any(|v| v.is_nan()) {
        return Err(Error::UnfillableGap {
            timestamp: first.timestamp,
        });
    }
    out.points.reserve(series.points.len());
    out.points.push(first.clone());
    for p in &series.points[1..] {
        let prev = out.points.last().unwrap().clone();
        let delta = p.timestamp - prev.timestamp;
        if delta <= 0 || delta % step != 0 {
            return Err(Error::invalid(format!(
                "timestamp {} is not {step}s-aligned after {}",
                p.timestamp, prev.timestamp
            )));
        }
        let mut t = prev.timestamp + step;
        while t < p.timestamp {
            out.points.push(Point {
                timestamp: t,
                values: prev.values.clone(),
            });
            t += step;
        }
        let values = p
            .values
            .iter()
            .zip(&prev.values)
            .map(|(v, before)| if v.is_nan() { *before } else { *v })
            .collect();
        out.points.push(Point {
            timestamp: p.timestamp,
            values,
        });
    }
    Ok(out)
}
