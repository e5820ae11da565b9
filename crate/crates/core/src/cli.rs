//! Command-line pipeline: synth/ingest -> train -> evaluate -> simulate.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::autoscale::{simulate, ScalingScenario};
use crate::error::{Error, ErrorClass};
use crate::evaluation::{compare_models, horizons_from_labels, metric_curve, windowed_mse, cdf, ModelReport};
use crate::neuralnet::{build_model, AdamConfig, DataConfig, Hyper, InputShape, Model, ModelFile, ModelKind, ParameterSet};
use crate::preprocessing::Scaler;
use crate::smtf::split;
use crate::synthetic::{sine_series, SineSpec};
use crate::trace_model::{aggregate_by_interval, fill_missing, load_trace, Schema, TraceSeries};
use crate::training::{predict, prepare, train, TrainConfig};

pub const DEFAULT_HORIZONS: &str = "10s,30s,1m,30m,1h,6h,1d";

#[derive(Debug, Parser)]
#[command(name = "esdnn", version, about = "Workload forecasting and auto-scaling simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic 3-feature series.
    Synth(SynthArgs),
    /// Turn a raw cluster trace into an interval-aligned series.
    Ingest(IngestArgs),
    /// Fit the scaler and train one model.
    Train(TrainArgs),
    /// Score trained models on their validation rows.
    Evaluate(EvaluateArgs),
    /// Compare predictive scaling against the moving-average baseline.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub len: usize,
    /// Period in steps.
    #[arg(long, default_value_t = 50.0)]
    pub period: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 300)]
    pub interval: i64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Preset id (`alibaba`, `google`) or path to a schema file.
    #[arg(long)]
    pub schema: String,
    #[arg(long)]
    pub input: PathBuf,
    /// Keep only this machine's records.
    #[arg(long)]
    pub machine_id: Option<String>,
    #[arg(long, default_value_t = 300)]
    pub interval: i64,
    /// Override the schema's target feature.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Series CSV written by `ingest` or `synth`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value = "esdnn", value_parser = ["esdnn", "gru", "rnn", "linear"])]
    pub model: String,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 72, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Leave out the non-target features observed at the prediction time.
    #[arg(long)]
    pub no_current_covariates: bool,
    /// Feed the window as a sequence of `window` steps instead of one flat step.
    #[arg(long, requires = "no_current_covariates")]
    pub sequence: bool,
    /// Fit the scaler on the whole series instead of the training prefix.
    #[arg(long)]
    pub fit_all: bool,
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub conv_filters: usize,
    #[arg(long, default_value_t = 16)]
    pub dense_units: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub range_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub range_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Model file from `train`; repeat for a comparison.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Comma-separated prediction lengths.
    #[arg(long, default_value = DEFAULT_HORIZONS)]
    pub horizons: String,
    /// Steps per MSE sample feeding the CDF.
    #[arg(long, default_value_t = 12)]
    pub cdf_window: usize,
    /// Model kind that ratios are taken against.
    #[arg(long, default_value = "gru")]
    pub baseline: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Predictions CSV written by `evaluate`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Preset id (`google`, `alibaba`) or path to a scenario file.
    #[arg(long)]
    pub scenario: String,
    /// Override the scenario's utilization threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Divide utilization values by this (100 for percentages).
    #[arg(long, default_value_t = 1.0)]
    pub utilization_scale: f64,
    /// Use the normalized prediction columns.
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(e) => match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} '{}' does not exist", path.display())))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_out(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn read_series(path: &Path) -> CliResult<TraceSeries> {
    require_file(path, "series file")?;
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(TraceSeries::read_csv(f)?)
}

fn series_csv(series: &TraceSeries) -> String {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).expect("write to Vec");
    String::from_utf8(buf).expect("utf-8")
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    schema: Option<String>,
    seed: Option<u64>,
    config_hash: String,
    config: &'a C,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &'static str,
    schema: Option<String>,
    seed: Option<u64>,
    config: &C,
    inputs: &[&Path],
    outputs: &[PathBuf],
) -> CliResult<()> {
    let config_json = serde_json::to_string(config).expect("config serializes");
    let mut digests = Vec::new();
    for p in inputs {
        let bytes = fs::read(p).map_err(|e| Error::io(*p, e))?;
        digests.push(InputDigest {
            path: p.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        tool: "esdnn",
        version: env!("CARGO_PKG_VERSION"),
        command,
        schema,
        seed,
        config_hash: sha256_hex(config_json.as_bytes()),
        config,
        inputs: digests,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_out(out, "manifest.json", &text)?;
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let spec = SineSpec {
        len: a.len,
        period: a.period,
        noise_sigma: a.noise,
        interval_seconds: a.interval,
        ..SineSpec::default()
    };
    let series = sine_series(&spec, a.seed)?;
    let out = write_out(&a.out, "series.csv", &series_csv(&series))?;
    write_manifest(&a.out, "synth", None, Some(a.seed), a, &[], &[out])?;
    eprintln!("wrote {} points", series.len());
    Ok(())
}

fn resolve_schema(id: &str) -> CliResult<Schema> {
    if let Some(s) = Schema::preset(id) {
        return Ok(s);
    }
    let path = Path::new(id);
    if path.is_file() {
        return Ok(Schema::from_file(path)?);
    }
    Err(usage(format!("schema '{id}' is neither a preset (alibaba, google) nor a file")))
}

pub fn cmd_ingest(a: &IngestArgs) -> CliResult<()> {
    let schema = resolve_schema(&a.schema)?;
    require_file(&a.input, "trace file")?;
    if a.interval <= 0 {
        return Err(usage("--interval must be positive"));
    }
    let mut trace = load_trace(&a.input, &schema)?;
    if let Some(id) = &a.machine_id {
        trace = trace.for_machine(id)?;
    }
    let mut series = fill_missing(&aggregate_by_interval(&trace, a.interval)?)?;
    if let Some(t) = &a.target {
        series = series.with_target(t)?;
    }
    let out = write_out(&a.out, "series.csv", &series_csv(&series))?;
    write_manifest(&a.out, "ingest", Some(schema.name.clone()), Some(a.seed), a, &[&a.input], &[out])?;
    eprintln!("wrote {} points ({} rows dropped)", series.len(), trace.dropped);
    Ok(())
}

fn u64_to_usize(v: u64, flag: &str) -> CliResult<usize> {
    usize::try_from(v).map_err(|_| usage(format!("{flag} is too large")))
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(usage("--train-fraction must lie in (0, 1)"));
    }
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(usage("--lr must be positive"));
    }
    if !(a.range_min < a.range_max) {
        return Err(usage("--range-min must be below --range-max"));
    }
    let kind: ModelKind = a.model.parse().map_err(|e: Error| usage(e.to_string()))?;
    let series = read_series(&a.input)?;
    let window = u64_to_usize(a.window, "--window")?;
    let data = DataConfig {
        target: a
            .target
            .clone()
            .unwrap_or_else(|| series.feature_names[series.target_index].clone()),
        window,
        current_covariates: !a.no_current_covariates,
        train_fraction: a.train_fraction,
        interval_seconds: series.interval_seconds,
    };
    let prep = prepare(&series, &data, None, a.fit_all, (a.range_min, a.range_max))?;
    let (tr, va) = split(&prep.dataset, a.train_fraction)?;

    let input = if a.sequence {
        InputShape {
            steps: window,
            channels: series.feature_count(),
        }
    } else {
        InputShape {
            steps: 1,
            channels: prep.dataset.n_inputs(),
        }
    };
    let hyper = Hyper {
        hidden: a.hidden,
        conv_filters: a.conv_filters,
        dense_units: a.dense_units,
        ..Hyper::default()
    };
    let (model, params) = build_model(kind, input, &hyper, a.seed)?;
    let cfg = TrainConfig {
        epochs: u64_to_usize(a.epochs, "--epochs")?,
        batch_size: u64_to_usize(a.batch, "--batch")?,
        seed: a.seed,
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        shuffle: a.shuffle,
        ..TrainConfig::default()
    };
    let (params, report) = train(&model, params, &tr, &va, &cfg)?;

    let mut file = ModelFile::new(&model, &hyper, &params, a.seed);
    file.scaler = Some("scaler.txt".into());
    file.data = Some(data);
    let outputs = vec![
        write_out(&a.out, "model.json", &file.to_json())?,
        write_out(&a.out, "scaler.txt", &prep.scaler.to_text())?,
        write_out(&a.out, "train_report.csv", &report.to_csv(false))?,
        write_out(&a.out, "train_timing.csv", &report.to_csv(true))?,
    ];
    write_manifest(&a.out, "train", None, Some(a.seed), a, &[&a.input], &outputs)?;
    let last = report.epochs.last().expect("at least one epoch");
    eprintln!(
        "{kind}: {} epochs, {} steps, train loss {:.6e}, validation mse {:.6e}",
        report.epochs.len(),
        report.optimizer_steps,
        report.final_train_loss,
        last.val_mse
    );
    Ok(())
}

struct Evaluated {
    name: String,
    report: ModelReport,
    predictions_csv: String,
    cdf_csv: String,
}

fn evaluate_one(path: &Path, series: &TraceSeries, labels: &[&str], cdf_window: usize) -> CliResult<Evaluated> {
    require_file(path, "model file")?;
    let file = ModelFile::load(path)?;
    let (model, params): (Model, ParameterSet) = file.restore()?;
    let bad = |m: &str| Error::Format {
        what: "model file",
        message: m.to_string(),
    };
    let data = file.data.clone().ok_or_else(|| bad("no data configuration"))?;
    let scaler_rel = file.scaler.clone().ok_or_else(|| bad("no scaler reference"))?;
    let scaler_path = path.parent().unwrap_or(Path::new(".")).join(scaler_rel);
    require_file(&scaler_path, "scaler file")?;
    let text = fs::read_to_string(&scaler_path).map_err(|e| Error::io(&scaler_path, e))?;
    let scaler = Scaler::from_text(&text)?;
    if data.interval_seconds != series.interval_seconds {
        return Err(Error::invalid("series interval differs from the one the model was trained on").into());
    }

    let prep = prepare(series, &data, Some(scaler), false, (0.0, 1.0))?;
    let (_, va) = split(&prep.dataset, data.train_fraction)?;
    let pred_norm = predict(&model, &params, &va)?;
    let target = va.target;
    let actual = prep.scaler.inverse_transform(&va.labels, target)?;
    let pred = prep.scaler.inverse_transform(&pred_norm, target)?;

    let horizons = horizons_from_labels(labels, series.interval_seconds)?;
    let metrics = metric_curve((&va.labels, &pred_norm), (&actual, &pred), &horizons)?;

    let mut predictions_csv = String::from("t,timestamp,actual,predicted,actual_normalized,predicted_normalized\n");
    for i in 0..va.len() {
        use std::fmt::Write as _;
        writeln!(
            predictions_csv,
            "{i},{},{},{},{},{}",
            va.label_timestamps[i], actual[i], pred[i], va.labels[i], pred_norm[i]
        )
        .unwrap();
    }
    let samples = windowed_mse(&va.labels, &pred_norm, cdf_window.min(va.len()).max(1))?;
    let name = model.spec().kind.to_string();
    Ok(Evaluated {
        report: ModelReport {
            model: name.clone(),
            metrics,
        },
        name,
        predictions_csv,
        cdf_csv: cdf(&samples)?.to_csv(),
    })
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    if a.cdf_window == 0 {
        return Err(usage("--cdf-window must be positive"));
    }
    let labels: Vec<&str> = a.horizons.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if labels.is_empty() {
        return Err(usage("--horizons is empty"));
    }
    let series = read_series(&a.input)?;
    let mut evaluated: Vec<Evaluated> = Vec::new();
    for path in &a.models {
        let e = evaluate_one(path, &series, &labels, a.cdf_window)?;
        if evaluated.iter().any(|o| o.name == e.name) {
            return Err(usage(format!("two models of kind '{}'", e.name)));
        }
        evaluated.push(e);
    }
    let reports: Vec<ModelReport> = evaluated.iter().map(|e| e.report.clone()).collect();
    let cmp = compare_models(&reports, &a.baseline)?;
    let mut outputs = vec![
        write_out(&a.out, "metrics.csv", &cmp.table_csv())?,
        write_out(&a.out, "metrics.jsonl", &cmp.json_lines())?,
    ];
    if let Some(r) = cmp.ratio_csv() {
        outputs.push(write_out(&a.out, "ratio.csv", &r)?);
    }
    for e in &evaluated {
        outputs.push(write_out(&a.out, &format!("predictions_{}.csv", e.name), &e.predictions_csv)?);
        outputs.push(write_out(&a.out, &format!("cdf_{}.csv", e.name), &e.cdf_csv)?);
    }
    let mut inputs: Vec<&Path> = vec![&a.input];
    inputs.extend(a.models.iter().map(PathBuf::as_path));
    write_manifest(&a.out, "evaluate", None, None, a, &inputs, &outputs)?;
    eprint!("{}", cmp.table_csv());
    Ok(())
}

fn resolve_scenario(id: &str) -> CliResult<ScalingScenario> {
    if let Ok(s) = ScalingScenario::preset(id) {
        return Ok(s);
    }
    let path = Path::new(id);
    if path.is_file() {
        return Ok(ScalingScenario::from_file(path)?);
    }
    Err(usage(format!("scenario '{id}' is neither a preset (google, alibaba) nor a file")))
}

fn read_prediction_columns(path: &Path, normalized: bool) -> CliResult<(Vec<f64>, Vec<f64>)> {
    require_file(path, "predictions file")?;
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format {
        what: "predictions",
        message: e.to_string(),
    })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format {
            what: "predictions",
            message: e.to_string(),
        })?
        .clone();
    let (ca, cp) = if normalized {
        ("actual_normalized", "predicted_normalized")
    } else {
        ("actual", "predicted")
    };
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Format {
            what: "predictions",
            message: format!("missing '{name}' column"),
        })
    };
    let (ia, ip) = (col(ca)?, col(cp)?);
    let (mut actual, mut predicted) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let num = |j: usize| -> Result<f64, Error> {
            rec.get(j).and_then(|v| v.trim().parse().ok()).ok_or_else(|| Error::Parse {
                line,
                message: format!("bad number in column {}", j + 1),
            })
        };
        actual.push(num(ia)?);
        predicted.push(num(ip)?);
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput { dropped: 0 }.into());
    }
    Ok((actual, predicted))
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut scenario = resolve_scenario(&a.scenario)?;
    if let Some(t) = a.threshold {
        if !(t > 0.0 && t <= 1.0) {
            return Err(usage("--threshold must lie in (0, 1]"));
        }
        scenario.threshold = t;
    }
    if !(a.utilization_scale > 0.0 && a.utilization_scale.is_finite()) {
        return Err(usage("--utilization-scale must be positive"));
    }
    let (actual, predicted) = read_prediction_columns(&a.predictions, a.normalized)?;
    let scale = |v: Vec<f64>| v.into_iter().map(|x| x / a.utilization_scale).collect::<Vec<_>>();
    let report = simulate(&scale(actual), &scale(predicted), &scenario)?;
    let mut summary = serde_json::to_string_pretty(&serde_json::json!({
        "intervals": report.steps.len(),
        "saturated_intervals": report.steps.iter().filter(|s| s.saturated).count(),
        "ratio": report.summary(),
    }))
    .expect("summary serializes");
    summary.push('\n');
    let outputs = vec![
        write_out(&a.out, "scaling.csv", &report.to_csv())?,
        write_out(&a.out, "scaling_summary.json", &summary)?,
    ];
    write_manifest(&a.out, "simulate", None, None, a, &[&a.predictions], &outputs)?;
    eprint!("{summary}");
    Ok(())
}
