//! Forecast error metrics, empirical CDFs and model comparison tables.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("metrics need at least one value"));
    }
    Ok(())
}

pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(sum / actual.len() as f64)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    mse(actual, predicted).map(f64::sqrt)
}

/// Mean of `|actual - predicted| / |actual|` (a fraction, not a percentage).
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let mut sum = 0.0;
    for (index, (a, p)) in actual.iter().zip(predicted).enumerate() {
        if *a == 0.0 {
            return Err(Error::DivisionByZero { index });
        }
        sum += ((a - p) / a).abs();
    }
    Ok(sum / actual.len() as f64)
}

/// Empirical CDF evaluated at each distinct sample value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfCurve {
    pub values: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl CdfCurve {
    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.fractions[idx - 1]
        }
    }

    /// Two-column `value,fraction` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,fraction\n");
        for (v, f) in self.values.iter().zip(&self.fractions) {
            writeln!(s, "{v},{f}").unwrap();
        }
        s
    }
}

pub fn cdf(values: &[f64]) -> Result<CdfCurve> {
    if values.is_empty() {
        return Err(Error::invalid("cdf of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cdf sample contains non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut curve = CdfCurve {
        values: Vec::new(),
        fractions: Vec::new(),
    };
    for (i, &v) in sorted.iter().enumerate() {
        if i + 1 < n && sorted[i + 1] == v {
            continue;
        }
        curve.values.push(v);
        curve.fractions.push((i + 1) as f64 / n as f64);
    }
    Ok(curve)
}

/// A named prediction length measured in series steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Horizon {
    pub label: String,
    pub steps: usize,
}

/// Parses `10s`, `30s`, `1m`, `1 min`, `30min`, `1h`, `1d`, `2 days` and
/// similar into seconds.
pub fn parse_duration(label: &str) -> Result<u64> {
    let t = label.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let n: u64 = num
        .parse()
        .map_err(|_| Error::invalid(format!("duration '{label}' has no leading integer")))?;
    let scale = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "s" | "sec" | "secs" | "second" | "seconds" => 1,
        "m" | "min" | "mins" | "minute" | "minutes" => 60,
        "h" | "hr" | "hour" | "hours" => 3600,
        "d" | "day" | "days" => 86_400,
        other => return Err(Error::invalid(format!("unknown duration unit '{other}' in '{label}'"))),
    };
    if n == 0 {
        return Err(Error::invalid(format!("duration '{label}' must be positive")));
    }
    Ok(n * scale)
}

/// Converts duration labels to step counts, rounding up to whole intervals.
pub fn horizons_from_labels(labels: &[&str], interval_seconds: i64) -> Result<Vec<Horizon>> {
    if interval_seconds <= 0 {
        return Err(Error::invalid("interval must be positive"));
    }
    labels
        .iter()
        .map(|l| {
            let secs = parse_duration(l)?;
            Ok(Horizon {
                label: l.trim().to_string(),
                steps: secs.div_ceil(interval_seconds as u64) as usize,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub prediction_length: String,
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    /// Original-unit MAPE; `None` when an actual value is zero.
    pub mape: Option<f64>,
    /// MAPE of the same pair the MSE was computed on.
    pub mape_normalized: Option<f64>,
}

fn guarded_mape(actual: &[f64], predicted: &[f64]) -> Result<Option<f64>> {
    match mape(actual, predicted) {
        Ok(v) => Ok(Some(v)),
        Err(Error::DivisionByZero { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn prefix_report(h: &Horizon, actual: &[f64], predicted: &[f64], mape_pair: (&[f64], &[f64])) -> Result<MetricReport> {
    if h.steps == 0 || h.steps > actual.len() {
        return Err(Error::invalid(format!(
            "horizon {} needs {} points, only {} available",
            h.label,
            h.steps,
            actual.len()
        )));
    }
    let (a, p) = (&actual[..h.steps], &predicted[..h.steps]);
    let m = mse(a, p)?;
    Ok(MetricReport {
        prediction_length: h.label.clone(),
        n: h.steps,
        mse: m,
        rmse: m.sqrt(),
        mape: guarded_mape(&mape_pair.0[..h.steps], &mape_pair.1[..h.steps])?,
        mape_normalized: guarded_mape(a, p)?,
    })
}

/// Metrics over growing prefixes, one report per horizon.
pub fn sliding_mse_curve(actual: &[f64], predicted: &[f64], horizons: &[Horizon]) -> Result<Vec<MetricReport>> {
    check_pair(actual, predicted)?;
    horizons
        .iter()
        .map(|h| prefix_report(h, actual, predicted, (actual, predicted)))
        .collect()
}

/// Like [`sliding_mse_curve`] but MSE/RMSE come from the normalized pair and
/// MAPE from the original-unit pair.
pub fn metric_curve(
    normalized: (&[f64], &[f64]),
    original: (&[f64], &[f64]),
    horizons: &[Horizon],
) -> Result<Vec<MetricReport>> {
    check_pair(normalized.0, normalized.1)?;
    check_pair(original.0, original.1)?;
    if original.0.len() != normalized.0.len() {
        return Err(Error::invalid("normalized and original series differ in length"));
    }
    horizons
        .iter()
        .map(|h| prefix_report(h, normalized.0, normalized.1, original))
        .collect()
}

/// Squared-error MSE of consecutive non-overlapping windows (last partial window dropped).
pub fn windowed_mse(actual: &[f64], predicted: &[f64], window: usize) -> Result<Vec<f64>> {
    check_pair(actual, predicted)?;
    if window == 0 || window > actual.len() {
        return Err(Error::invalid(format!("window {window} does not fit {} points", actual.len())));
    }
    actual
        .chunks_exact(window)
        .zip(predicted.chunks_exact(window))
        .map(|(a, p)| mse(a, p))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub metrics: Vec<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub horizons: Vec<String>,
    pub models: Vec<ModelReport>,
    /// Per model, per horizon `model_mse / baseline_mse`; absent without a baseline report.
    pub ratios: Option<Vec<(String, Vec<f64>)>>,
}

pub fn compare_models(reports: &[ModelReport], baseline: &str) -> Result<Comparison> {
    let first = reports.first().ok_or_else(|| Error::invalid("no model reports to compare"))?;
    let horizons: Vec<String> = first.metrics.iter().map(|m| m.prediction_length.clone()).collect();
    for r in reports {
        let hs: Vec<&str> = r.metrics.iter().map(|m| m.prediction_length.as_str()).collect();
        if hs != horizons.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::invalid(format!("model {} reports different horizons", r.model)));
        }
    }
    let ratios = reports.iter().find(|r| r.model == baseline).map(|base| {
        reports
            .iter()
            .map(|r| {
                let v = r
                    .metrics
                    .iter()
                    .zip(&base.metrics)
                    .map(|(m, b)| if m.mse == b.mse { 1.0 } else { m.mse / b.mse })
                    .collect();
                (r.model.clone(), v)
            })
            .collect()
    });
    Ok(Comparison {
        horizons,
        models: reports.to_vec(),
        ratios,
    })
}

impl Comparison {
    /// One row per horizon; per model `_mse,_rmse,_mape,_mape_normalized` columns.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("prediction_length");
        for m in &self.models {
            write!(s, ",{0}_mse,{0}_rmse,{0}_mape,{0}_mape_normalized", m.model).unwrap();
        }
        s.push('\n');
        for (i, h) in self.horizons.iter().enumerate() {
            s.push_str(h);
            for m in &self.models {
                let r = &m.metrics[i];
                write!(s, ",{},{}", r.mse, r.rmse).unwrap();
                for v in [r.mape, r.mape_normalized] {
                    s.push(',');
                    if let Some(v) = v {
                        write!(s, "{v}").unwrap();
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn ratio_csv(&self) -> Option<String> {
        let ratios = self.ratios.as_ref()?;
        let mut s = String::from("prediction_length");
        for (m, _) in ratios {
            write!(s, ",{m}").unwrap();
        }
        s.push('\n');
        for (i, h) in self.horizons.iter().enumerate() {
            s.push_str(h);
            for (_, r) in ratios {
                write!(s, ",{}", r[i]).unwrap();
            }
            s.push('\n');
        }
        Some(s)
    }

    /// One JSON object per (model, horizon).
    pub fn json_lines(&self) -> String {
        let mut s = String::new();
        for m in &self.models {
            for r in &m.metrics {
                let line = serde_json::json!({
                    "model": m.model,
                    "prediction_length": r.prediction_length,
                    "n": r.n,
                    "mse": r.mse,
                    "rmse": r.rmse,
                    "mape": r.mape,
                    "mape_normalized": r.mape_normalized,
                });
                writeln!(s, "{line}").unwrap();
            }
        }
        s
    }
}
