//! Mini-batch training loop and batch prediction.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::mse;
use crate::neuralnet::{adam_step, dropout_mask, huber_loss, AdamConfig, DataConfig, Model, ParameterSet, Sequence};
use crate::preprocessing::Scaler;
use crate::smtf::{to_supervised, train_rows, SmtfOptions, SupervisedDataset};
use crate::trace_model::TraceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub huber_delta: f64,
    pub adam: AdamConfig,
    /// Seeded reshuffle of training rows every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 72,
            seed: 0,
            huber_delta: 1.0,
            adam: AdamConfig::default(),
            shuffle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean Huber loss over the epoch's batches (train mode).
    pub train_loss: f64,
    /// Validation MSE in inference mode after the epoch.
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub optimizer_steps: u64,
    /// Huber loss of the final parameters over the whole training set, inference mode.
    pub final_train_loss: f64,
}

impl TrainReport {
    /// `epoch,train_loss,val_mse[,seconds]`
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut s = String::from(if with_timing {
            "epoch,train_loss,val_mse,seconds\n"
        } else {
            "epoch,train_loss,val_mse\n"
        });
        for e in &self.epochs {
            write!(s, "{},{},{}", e.epoch, e.train_loss, e.val_mse).unwrap();
            if with_timing {
                write!(s, ",{}", e.seconds).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Fitted scaler and scaled supervised rows for one data configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scaler: Scaler,
    pub dataset: SupervisedDataset,
}

/// Scales `series` and reframes it. Without a given scaler one is fitted on
/// the rows that feed the training split (or on everything with `fit_all`).
pub fn prepare(
    series: &TraceSeries,
    data: &DataConfig,
    scaler: Option<Scaler>,
    fit_all: bool,
    range: (f64, f64),
) -> Result<Prepared> {
    let series = series.clone().with_target(&data.target)?;
    if data.window >= series.len() {
        return Err(Error::invalid(format!(
            "window {} needs more than {} points",
            data.window,
            series.len()
        )));
    }
    let scaler = match scaler {
        Some(s) if s.feature_names != series.feature_names => {
            return Err(Error::invalid("scaler features do not match the series"));
        }
        Some(s) => s,
        None if fit_all => Scaler::fit(&series, range)?,
        None => {
            let cut = train_rows(series.len() - data.window, data.train_fraction)?;
            Scaler::fit(&series.prefix(cut + data.window), range)?
        }
    };
    let scaled = scaler.transform(&series)?;
    let opts = SmtfOptions {
        window: data.window,
        target: series.target_index,
        current_covariates: data.current_covariates,
    };
    Ok(Prepared {
        dataset: to_supervised(&scaled, &opts)?,
        scaler,
    })
}

/// Checks that dataset rows fit the model input and reshapes them.
pub fn dataset_inputs(model: &Model, dataset: &SupervisedDataset) -> Result<Vec<Sequence>> {
    let shape = model.spec().input;
    if dataset.n_inputs() != shape.len() {
        return Err(Error::invalid(format!(
            "dataset rows have {} inputs, model expects {}x{}",
            dataset.n_inputs(),
            shape.steps,
            shape.channels
        )));
    }
    if shape.steps > 1 && (dataset.has_current_covariates() || shape.steps != dataset.window) {
        return Err(Error::invalid(
            "sequence input needs a lag-only dataset whose window equals the model steps",
        ));
    }
    (0..dataset.len()).map(|i| model.input_from_row(dataset.row(i))).collect()
}

fn now() -> Option<std::time::Instant> {
    #[cfg(not(target_arch = "wasm32"))]
    {
        Some(std::time::Instant::now())
    }
    #[cfg(target_arch = "wasm32")]
    {
        None
    }
}

pub fn train(
    model: &Model,
    mut params: ParameterSet,
    train_set: &SupervisedDataset,
    val_set: &SupervisedDataset,
    config: &TrainConfig,
) -> Result<(ParameterSet, TrainReport)> {
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::invalid("epochs and batch_size must be >= 1"));
    }
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    let inputs = dataset_inputs(model, train_set)?;
    let val_inputs = dataset_inputs(model, val_set)?;
    let labels = &train_set.labels;

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let width = model.dropout_width();
    let rate = model.spec().dropout;

    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let started = now();
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let at = |e: Error| Error::Training {
                epoch,
                batch: b + 1,
                source: Box::new(e),
            };
            let xs: Vec<Sequence> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let masks: Option<Vec<Vec<f64>>> =
                (width > 0).then(|| chunk.iter().map(|_| dropout_mask(width, rate, &mut dropout_rng)).collect());
            let (loss, grads) = model
                .loss_and_gradients(&params, &xs, &ys, config.huber_delta, masks.as_deref())
                .map_err(at)?;
            adam_step(&mut params, &grads, &config.adam).map_err(at)?;
            weighted += loss * chunk.len() as f64;
        }
        let preds = predict_inputs(model, &params, &val_inputs).map_err(|e| Error::Training {
            epoch,
            batch: 0,
            source: Box::new(e),
        })?;
        epochs.push(EpochStats {
            epoch,
            train_loss: weighted / inputs.len() as f64,
            val_mse: mse(&val_set.labels, &preds)?,
            seconds: started.map_or(0.0, |s| s.elapsed().as_secs_f64()),
        });
    }
    let preds = predict_inputs(model, &params, &inputs)?;
    let final_train_loss = huber_loss(&preds, labels, config.huber_delta)?;
    let optimizer_steps = params.adam.step;
    Ok((
        params,
        TrainReport {
            epochs,
            optimizer_steps,
            final_train_loss,
        },
    ))
}

fn predict_inputs(model: &Model, params: &ParameterSet, inputs: &[Sequence]) -> Result<Vec<f64>> {
    inputs.iter().map(|x| model.predict_one(&params.values, x)).collect()
}

/// Inference-mode predictions, in the dataset's (normalized) units.
pub fn predict(model: &Model, params: &ParameterSet, samples: &SupervisedDataset) -> Result<Vec<f64>> {
    predict_inputs(model, params, &dataset_inputs(model, samples)?)
}
