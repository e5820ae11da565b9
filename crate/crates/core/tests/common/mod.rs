//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use esdnn::neuralnet::{build_model, dropout_mask, Hyper, InputShape, Model, ModelKind, ParameterSet, Sequence};
use esdnn::smtf::SupervisedDataset;
use esdnn::trace_model::TraceSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Magnitude below which gradients are compared absolutely (scaled by the tolerance).
pub const GRAD_FLOOR: f64 = 1e-6;

/// One randomly drawn tiny network with a fixed batch.
pub struct GradCase {
    pub model: Model,
    pub params: ParameterSet,
    pub inputs: Vec<Sequence>,
    pub targets: Vec<f64>,
    pub masks: Option<Vec<Vec<f64>>>,
    pub description: String,
}

pub fn random_case(kind: ModelKind, rng: &mut ChaCha8Rng) -> GradCase {
    let hidden = rng.random_range(1..=4);
    let window = rng.random_range(1..=4);
    let k = rng.random_range(1..=3);
    let sequence = rng.random_bool(0.5);
    let input = if sequence {
        InputShape { steps: window, channels: k }
    } else {
        InputShape {
            steps: 1,
            channels: window * k + k - 1,
        }
    };
    let hyper = Hyper {
        hidden,
        conv_filters: rng.random_range(1..=4),
        conv_kernel: rng.random_range(1..=5),
        dense_units: rng.random_range(1..=4),
        ..Hyper::default()
    };
    let (model, mut params) = build_model(kind, input, &hyper, rng.random()).unwrap();
    for v in &mut params.values {
        *v = rng.random_range(-0.8..0.8);
    }
    let batch = rng.random_range(1..=3);
    let inputs: Vec<Sequence> = (0..batch)
        .map(|_| {
            let data = (0..input.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            Sequence::new(input.steps, input.channels, data).unwrap()
        })
        .collect();
    let targets = (0..batch).map(|_| rng.random_range(0.0..1.0)).collect();
    let width = model.dropout_width();
    let masks = (width > 0).then(|| {
        (0..batch)
            .map(|_| dropout_mask(width, model.spec().dropout, rng))
            .collect()
    });
    GradCase {
        description: format!("{kind} {input:?} {hyper:?} batch={batch}"),
        model,
        params,
        inputs,
        targets,
        masks,
    }
}

impl GradCase {
    pub fn loss_at(&self, values: &[f64]) -> f64 {
        let mut p = self.params.clone();
        p.values.copy_from_slice(values);
        self.model
            .loss_and_gradients(&p, &self.inputs, &self.targets, 1.0, self.masks.as_deref())
            .unwrap()
            .0
    }

    /// Compares every analytic gradient entry with a central difference.
    /// `Ok(None)` means the case sits on an activation or loss kink and should be redrawn.
    pub fn check(&self) -> Result<Option<usize>, String> {
        let (_, grads) = self
            .model
            .loss_and_gradients(&self.params, &self.inputs, &self.targets, 1.0, self.masks.as_deref())
            .map_err(|e| e.to_string())?;
        let base = self.params.values.clone();
        let mut checked = 0;
        for i in 0..base.len() {
            if !self.params.layout.iter().any(|t| t.trainable && t.range().contains(&i)) {
                continue;
            }
            let mut v = base.clone();
            v[i] = base[i] + FD_STEP;
            let up = self.loss_at(&v);
            v[i] = base[i] - FD_STEP;
            let down = self.loss_at(&v);
            let fd = (up - down) / (2.0 * FD_STEP);
            let an = grads.0[i];
            let scale = an.abs().max(fd.abs()).max(GRAD_FLOOR);
            if (an - fd).abs() > GRAD_REL_TOL * scale {
                let mid = self.loss_at(&base);
                let right = (up - mid) / FD_STEP;
                let left = (mid - down) / FD_STEP;
                if (right - left).abs() > 1e-2 * right.abs().max(left.abs()).max(1e-3) {
                    return Ok(None);
                }
                return Err(format!(
                    "{}: parameter {} ({}) analytic {an:e} vs numeric {fd:e}",
                    self.description,
                    i,
                    self.params.name_of(i)
                ));
            }
            checked += 1;
        }
        Ok(Some(checked))
    }
}

/// Runs `count` gradient checks of `kind`, redrawing cases that land on a kink.
pub fn gradient_sweep(kind: ModelKind, count: usize, seed: u64) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut done, mut redrawn, mut entries) = (0, 0, 0);
    while done < count {
        let case = random_case(kind, &mut rng);
        match case.check()? {
            Some(n) => {
                done += 1;
                entries += n;
            }
            None => {
                redrawn += 1;
                if redrawn > count {
                    return Err(format!("too many kink redraws for {kind}"));
                }
            }
        }
    }
    Ok((entries, redrawn))
}

/// Shift-and-delete construction: materialise every lagged copy of the table
/// with missing markers at the edges, then keep only complete rows.
pub fn naive_supervised(series: &TraceSeries, window: usize, target: usize, covariates: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = series.len() as isize;
    let k = series.feature_count();
    let at = |t: isize, f: usize| -> Option<f64> {
        (0..n).contains(&t).then(|| series.points[t as usize].values[f])
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    // Candidate rows run past both ends so that the edges carry missing cells.
    for t in -(window as isize)..n + window as isize {
        let mut row: Vec<Option<f64>> = Vec::new();
        for lag in (1..=window as isize).rev() {
            for f in 0..k {
                row.push(at(t - lag, f));
            }
        }
        if covariates {
            for f in (0..k).filter(|&f| f != target) {
                row.push(at(t, f));
            }
        }
        if let (Some(row), Some(label)) = (row.into_iter().collect::<Option<Vec<f64>>>(), at(t, target)) {
            rows.push(row);
            labels.push(label);
        }
    }
    (rows, labels)
}

pub fn dataset_rows(ds: &SupervisedDataset) -> Vec<Vec<f64>> {
    (0..ds.len()).map(|i| ds.row(i).to_vec()).collect()
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}
