//! Demo operations over plain strings and numbers, so they run natively too.

use esdnn::autoscale::{simulate, ScalingScenario};
use esdnn::neuralnet::{build_model, DataConfig, Hyper, InputShape, ModelKind};
use esdnn::smtf::{split, to_supervised, SmtfOptions};
use esdnn::synthetic::{sine_series, SineSpec};
use esdnn::trace_model::TraceSeries;
use esdnn::training::{predict, prepare, train, TrainConfig};
use esdnn::Result;
use serde::Serialize;

/// Reframes a series CSV (as written by `esdnn synth` or `ingest`) and returns
/// the supervised table as CSV.
pub fn smtf_table(series_csv: &str, window: usize, covariates: bool) -> Result<String> {
    let series = TraceSeries::read_csv(series_csv.as_bytes())?;
    let opts = SmtfOptions {
        current_covariates: covariates,
        ..SmtfOptions::new(window, series.target_index)
    };
    Ok(to_supervised(&series, &opts)?.to_csv_string())
}

#[derive(Debug, Serialize)]
pub struct ScalingView {
    pub m_base: Vec<u64>,
    pub m_pred: Vec<u64>,
    pub ratio_mean: Option<f64>,
}

/// Runs both scaling policies over comma- or whitespace-separated utilization fractions.
pub fn simulate_scaling(actual: &str, predicted: &str, scenario: &str, threshold: f64) -> Result<ScalingView> {
    let mut sc = ScalingScenario::preset(scenario)?;
    sc.threshold = threshold;
    let report = simulate(&numbers(actual)?, &numbers(predicted)?, &sc)?;
    Ok(ScalingView {
        m_base: report.steps.iter().map(|s| s.m_base).collect(),
        m_pred: report.steps.iter().map(|s| s.m_pred).collect(),
        ratio_mean: report.summary().map(|s| s.mean),
    })
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| esdnn::Error::InvalidArgument(format!("'{s}' is not a number")))
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Forecast {
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub val_mse: Vec<f64>,
}

/// Trains a small model on a seeded sine series and returns its validation forecast.
pub fn forecast_sine(kind: &str, len: usize, noise: f64, epochs: usize, seed: u64) -> Result<Forecast> {
    let kind: ModelKind = kind.parse()?;
    let series = sine_series(&SineSpec { len, noise_sigma: noise, ..SineSpec::default() }, seed)?;
    let data = DataConfig {
        target: "cpu".into(),
        window: 3,
        current_covariates: true,
        train_fraction: 0.8,
        interval_seconds: series.interval_seconds,
    };
    let prep = prepare(&series, &data, None, false, (0.0, 1.0))?;
    let (tr, va) = split(&prep.dataset, data.train_fraction)?;
    let hyper = Hyper { hidden: 8, conv_filters: 8, dense_units: 8, ..Hyper::default() };
    let input = InputShape { steps: 1, channels: tr.n_inputs() };
    let (model, params) = build_model(kind, input, &hyper, seed)?;
    let cfg = TrainConfig { epochs, batch_size: 32, seed, ..TrainConfig::default() };
    let (params, report) = train(&model, params, &tr, &va, &cfg)?;
    let pred = predict(&model, &params, &va)?;
    Ok(Forecast {
        actual: prep.scaler.inverse_transform(&va.labels, va.target)?,
        predicted: prep.scaler.inverse_transform(&pred, va.target)?,
        val_mse: report.epochs.iter().map(|e| e.val_mse).collect(),
    })
}
