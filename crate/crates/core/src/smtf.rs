//! Sliding-window reframing of a multivariate series into supervised rows.
//!
//! For prediction time `t` and window `w`, a row holds every feature at
//! `t-w .. t-1` (oldest first), then the non-target features at `t`, and is
//! labelled with the target feature at `t`. Rows whose window would reach
//! before the start of the series are never produced.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::trace_model::TraceSeries;

/// Source of one input column: `lag` intervals before the prediction time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub feature: usize,
    pub lag: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmtfOptions {
    pub window: usize,
    pub target: usize,
    /// Append non-target features observed at the prediction time.
    pub current_covariates: bool,
}

impl SmtfOptions {
    pub fn new(window: usize, target: usize) -> Self {
        SmtfOptions {
            window,
            target,
            current_covariates: true,
        }
    }
}

/// Row-major sample matrix plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub feature_names: Vec<String>,
    pub target: usize,
    pub window: usize,
    pub layout: Vec<Column>,
    pub samples: Vec<f64>,
    pub labels: Vec<f64>,
    /// Timestamp of each row's label.
    pub label_timestamps: Vec<i64>,
    pub interval_seconds: i64,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.layout.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_inputs();
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn has_current_covariates(&self) -> bool {
        self.layout.iter().any(|c| c.lag == 0)
    }

    pub fn column_name(&self, c: &Column) -> String {
        let f = &self.feature_names[c.feature];
        if c.lag == 0 {
            format!("{f}(t)")
        } else {
            format!("{f}(t-{})", c.lag)
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> SupervisedDataset {
        let n = self.n_inputs();
        SupervisedDataset {
            feature_names: self.feature_names.clone(),
            target: self.target,
            window: self.window,
            layout: self.layout.clone(),
            samples: self.samples[range.start * n..range.end * n].to_vec(),
            labels: self.labels[range.clone()].to_vec(),
            label_timestamps: self.label_timestamps[range].to_vec(),
            interval_seconds: self.interval_seconds,
        }
    }

    /// CSV with one named column per input and a trailing `label` column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<String> = self.layout.iter().map(|c| self.column_name(c)).collect();
        header.push("label".into());
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            for v in self.row(i) {
                write!(line, "{v},").unwrap();
            }
            write!(line, "{}", self.labels[i]).unwrap();
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("utf-8")
    }

    /// Reads a dump written by [`write_csv`](Self::write_csv). Timestamps are
    /// not stored in the dump; label timestamps are row indices.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let fmt = |message: String| Error::Format { what: "dataset", message };
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| fmt("empty file".into()))?
            .map_err(|e| fmt(e.to_string()))?;
        let mut names: Vec<&str> = header.split(',').collect();
        if names.pop() != Some("label") {
            return Err(fmt("last column must be 'label'".into()));
        }
        let mut feature_names: Vec<String> = Vec::new();
        let mut layout = Vec::new();
        for n in &names {
            let (f, rest) = n
                .rsplit_once("(t")
                .ok_or_else(|| fmt(format!("column '{n}' is not feature(t-lag)")))?;
            let lag = match rest.strip_suffix(')') {
                Some("") => 0,
                Some(l) => l
                    .strip_prefix('-')
                    .and_then(|l| l.parse().ok())
                    .ok_or_else(|| fmt(format!("bad lag in '{n}'")))?,
                None => return Err(fmt(format!("bad column '{n}'"))),
            };
            let feature = match feature_names.iter().position(|x| x == f) {
                Some(i) => i,
                None => {
                    feature_names.push(f.to_string());
                    feature_names.len() - 1
                }
            };
            layout.push(Column { feature, lag });
        }
        let window = layout.iter().map(|c| c.lag).max().unwrap_or(0);
        let covariates: Vec<usize> = layout.iter().filter(|c| c.lag == 0).map(|c| c.feature).collect();
        let target = (0..feature_names.len()).find(|f| !covariates.contains(f)).unwrap_or(0);
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| fmt(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i as u64 + 2,
                    message: e.to_string(),
                })?;
            if vals.len() != layout.len() + 1 {
                return Err(Error::Parse {
                    line: i as u64 + 2,
                    message: format!("expected {} cells, got {}", layout.len() + 1, vals.len()),
                });
            }
            samples.extend_from_slice(&vals[..layout.len()]);
            labels.push(vals[layout.len()]);
        }
        let label_timestamps = (0..labels.len() as i64).collect();
        Ok(SupervisedDataset {
            feature_names,
            target,
            window,
            layout,
            samples,
            labels,
            label_timestamps,
            interval_seconds: 1,
        })
    }
}

pub fn layout_for(k: usize, options: &SmtfOptions) -> Vec<Column> {
    let mut layout = Vec::with_capacity(options.window * k + k);
    for lag in (1..=options.window).rev() {
        layout.extend((0..k).map(|feature| Column { feature, lag }));
    }
    if options.current_covariates {
        layout.extend((0..k).filter(|&f| f != options.target).map(|feature| Column { feature, lag: 0 }));
    }
    layout
}

pub fn to_supervised(series: &TraceSeries, options: &SmtfOptions) -> Result<SupervisedDataset> {
    if options.window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let k = series.feature_count();
    if options.target >= k {
        return Err(Error::invalid(format!("target {} out of range for {k} features", options.target)));
    }
    if !series.is_uniform() {
        return Err(Error::invalid("series must be uniformly spaced with no missing values"));
    }
    let layout = layout_for(k, options);
    let n = series.len();
    let rows = n.saturating_sub(options.window);
    let mut samples = Vec::with_capacity(rows * layout.len());
    let mut labels = Vec::with_capacity(rows);
    let mut label_timestamps = Vec::with_capacity(rows);
    for t in options.window..n {
        for c in &layout {
            samples.push(series.points[t - c.lag].values[c.feature]);
        }
        labels.push(series.points[t].values[options.target]);
        label_timestamps.push(series.points[t].timestamp);
    }
    Ok(SupervisedDataset {
        feature_names: series.feature_names.clone(),
        target: options.target,
        window: options.window,
        layout,
        samples,
        labels,
        label_timestamps,
        interval_seconds: series.interval_seconds,
    })
}

/// Number of training rows `split` would produce.
pub fn train_rows(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut == 0 || cut == n {
        return Err(Error::invalid(format!("fraction {train_fraction} of {n} rows leaves an empty split")));
    }
    Ok(cut)
}

/// Time-ordered split: the first `floor(n * fraction)` rows train, the rest validate.
pub fn split(dataset: &SupervisedDataset, train_fraction: f64) -> Result<(SupervisedDataset, SupervisedDataset)> {
    let cut = train_rows(dataset.len(), train_fraction)?;
    Ok((dataset.slice(0..cut), dataset.slice(cut..dataset.len())))
}
