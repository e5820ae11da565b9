//! Layer stacks for the forecaster and its recurrent baselines.
//!
//! All kinds share the same skeleton: optional causal convolution, optional
//! recurrent layer unrolled over the input steps (last hidden state kept),
//! optional hidden dense layer with dropout, and a single linear output unit.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::layers::{CausalConv1d, ConvCache, Dense, GruCell, GruStep, RnnCell, RnnStep, Sequence};
use super::loss::{huber_grad, huber_loss};
use super::params::{Gradients, ParameterSet, TensorInfo};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// conv1d -> GRU -> dense(swish) -> dropout -> dense(1)
    Esdnn,
    /// GRU -> dense(1)
    Gru,
    /// tanh recurrence -> dense(1)
    Rnn,
    /// dense(1) over the flattened input; a reference regressor.
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Esdnn, ModelKind::Gru, ModelKind::Rnn, ModelKind::Linear];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Esdnn => "esdnn",
            ModelKind::Gru => "gru",
            ModelKind::Rnn => "rnn",
            ModelKind::Linear => "linear",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind '{s}' (expected esdnn, gru, rnn or linear)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub steps: usize,
    pub channels: usize,
}

impl InputShape {
    pub fn len(&self) -> usize {
        self.steps * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Gru,
    SimpleRnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrentSpec {
    pub cell: CellKind,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub units: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input: InputShape,
    pub conv: Option<ConvSpec>,
    pub recurrent: Option<RecurrentSpec>,
    pub dense: Option<DenseSpec>,
    pub dropout: f64,
}

/// Size knobs for [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub hidden: usize,
    pub dense_units: usize,
    pub dropout: f64,
    pub swish_beta: f64,
    /// When false the GRU biases are zero and frozen.
    pub recurrent_bias: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            conv_filters: 32,
            conv_kernel: 5,
            hidden: 32,
            dense_units: 16,
            dropout: 0.2,
            swish_beta: 1.0,
            recurrent_bias: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Recurrent {
    Gru(GruCell),
    Rnn(RnnCell),
}

/// A validated [`ModelSpec`] with parameter offsets resolved.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    conv: Option<(CausalConv1d, usize)>,
    recurrent: Option<(Recurrent, usize)>,
    dense: Option<(Dense, usize)>,
    out: (Dense, usize),
    param_count: usize,
}

/// Intermediate values of one forward pass, consumed by [`Model::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    conv: Option<(Sequence, ConvCache)>,
    gru_steps: Vec<GruStep>,
    rnn_steps: Vec<RnnStep>,
    features: Vec<f64>,
    dense_pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    out_in: Vec<f64>,
    out_pre: Vec<f64>,
    pub output: f64,
}

fn ensure_finite(values: &[f64], layer: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(layer))
    }
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let InputShape { steps, channels } = spec.input;
        if steps == 0 || channels == 0 {
            return Err(Error::invalid("input shape must be at least 1x1"));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(Error::invalid(format!("dropout {} must lie in [0, 1)", spec.dropout)));
        }
        let mut offset = 0;
        let mut width = channels;
        let conv = match spec.conv {
            Some(c) => {
                if c.filters == 0 || c.kernel == 0 {
                    return Err(Error::invalid("conv filters and kernel must be >= 1"));
                }
                let layer = CausalConv1d {
                    channels,
                    filters: c.filters,
                    kernel: c.kernel,
                    activation: c.activation,
                };
                let at = offset;
                offset += layer.param_count();
                width = c.filters;
                Some((layer, at))
            }
            None => None,
        };
        let recurrent = match spec.recurrent {
            Some(r) => {
                if r.hidden == 0 {
                    return Err(Error::invalid("hidden size must be >= 1"));
                }
                let (layer, n) = match r.cell {
                    CellKind::Gru => {
                        let c = GruCell { input: width, hidden: r.hidden };
                        (Recurrent::Gru(c), c.param_count())
                    }
                    CellKind::SimpleRnn => {
                        let c = RnnCell { input: width, hidden: r.hidden };
                        (Recurrent::Rnn(c), c.param_count())
                    }
                };
                let at = offset;
                offset += n;
                width = r.hidden;
                Some((layer, at))
            }
            None => {
                width *= steps;
                None
            }
        };
        let dense = match spec.dense {
            Some(d) => {
                if d.units == 0 {
                    return Err(Error::invalid("dense units must be >= 1"));
                }
                let layer = Dense {
                    input: width,
                    units: d.units,
                    activation: d.activation,
                };
                let at = offset;
                offset += layer.param_count();
                width = d.units;
                Some((layer, at))
            }
            None => None,
        };
        let out = Dense {
            input: width,
            units: 1,
            activation: Activation::Linear,
        };
        let out_at = offset;
        offset += out.param_count();
        Ok(Model {
            spec,
            conv,
            recurrent,
            dense,
            out: (out, out_at),
            param_count: offset,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Units subject to dropout (zero when dropout is disabled).
    pub fn dropout_width(&self) -> usize {
        match self.dense {
            Some((d, _)) if self.spec.dropout > 0.0 => d.units,
            _ => 0,
        }
    }

    /// Tensor names, shapes and offsets in buffer order.
    pub fn layout(&self, recurrent_bias: bool) -> Vec<TensorInfo> {
        let mut out = Vec::new();
        let mut push = |name: &str, shape: Vec<usize>, trainable: bool| {
            let offset = out.last().map_or(0, |t: &TensorInfo| t.offset + t.len());
            out.push(TensorInfo {
                name: name.into(),
                shape,
                offset,
                trainable,
            });
        };
        if let Some((c, _)) = self.conv {
            push("conv.kernel", vec![c.filters, c.kernel, c.channels], true);
            push("conv.bias", vec![c.filters], true);
        }
        match self.recurrent {
            Some((Recurrent::Gru(c), _)) => {
                let n = c.hidden + c.input;
                for w in ["gru.w_r", "gru.w_z", "gru.w_h"] {
                    push(w, vec![c.hidden, n], true);
                }
                for b in ["gru.b_r", "gru.b_z", "gru.b_h"] {
                    push(b, vec![c.hidden], recurrent_bias);
                }
            }
            Some((Recurrent::Rnn(c), _)) => {
                push("rnn.w", vec![c.hidden, c.hidden + c.input], true);
                push("rnn.b", vec![c.hidden], true);
            }
            None => {}
        }
        if let Some((d, _)) = self.dense {
            push("dense.w", vec![d.units, d.input], true);
            push("dense.b", vec![d.units], true);
        }
        let (o, _) = self.out;
        push("out.w", vec![1, o.input], true);
        push("out.b", vec![1], true);
        out
    }

    pub fn input_from_row(&self, row: &[f64]) -> Result<Sequence> {
        Sequence::new(self.spec.input.steps, self.spec.input.channels, row.to_vec())
    }

    /// Forward pass. `mask` holds dropout scale factors (train mode); `None`
    /// is inference mode.
    pub fn forward(&self, params: &[f64], x: &Sequence, mask: Option<&[f64]>) -> Result<ForwardCache> {
        if params.len() != self.param_count {
            return Err(Error::invalid(format!(
                "model needs {} parameters, got {}",
                self.param_count,
                params.len()
            )));
        }
        if x.steps != self.spec.input.steps || x.width != self.spec.input.channels {
            return Err(Error::invalid(format!(
                "input is {}x{}, model expects {}x{}",
                x.steps, x.width, self.spec.input.steps, self.spec.input.channels
            )));
        }
        let conv = match self.conv {
            Some((layer, at)) => {
                let (y, cache) = layer.forward(&params[at..at + layer.param_count()], x);
                ensure_finite(&y.data, "conv1d")?;
                Some((y, cache))
            }
            None => None,
        };
        let seq = conv.as_ref().map_or(x, |(y, _)| y);

        let mut gru_steps = Vec::new();
        let mut rnn_steps = Vec::new();
        let features = match self.recurrent {
            Some((Recurrent::Gru(cell), at)) => {
                let p = cell.view(&params[at..at + cell.param_count()]);
                let mut h = vec![0.0; cell.hidden];
                for t in 0..seq.steps {
                    let s = cell.step(&p, seq.row(t), &h);
                    h.clone_from(&s.h);
                    gru_steps.push(s);
                }
                ensure_finite(&h, "gru")?;
                h
            }
            Some((Recurrent::Rnn(cell), at)) => {
                let p = &params[at..at + cell.param_count()];
                let mut h = vec![0.0; cell.hidden];
                for t in 0..seq.steps {
                    let s = cell.step(p, seq.row(t), &h);
                    h.clone_from(&s.h);
                    rnn_steps.push(s);
                }
                ensure_finite(&h, "rnn")?;
                h
            }
            None => seq.data.clone(),
        };

        let (mut dense_pre, mut out_in) = (Vec::new(), features.clone());
        let mut used_mask = None;
        if let Some((layer, at)) = self.dense {
            let (pre, out) = layer.forward(&params[at..at + layer.param_count()], &features);
            ensure_finite(&out, "dense")?;
            out_in = match mask {
                Some(m) if self.spec.dropout > 0.0 => {
                    if m.len() != layer.units {
                        return Err(Error::invalid("dropout mask width mismatch"));
                    }
                    used_mask = Some(m.to_vec());
                    out.iter().zip(m).map(|(a, b)| a * b).collect()
                }
                _ => out,
            };
            dense_pre = pre;
        }
        let (layer, at) = self.out;
        let (out_pre, y) = layer.forward(&params[at..at + layer.param_count()], &out_in);
        ensure_finite(&y, "output")?;
        Ok(ForwardCache {
            conv,
            gru_steps,
            rnn_steps,
            features,
            dense_pre,
            mask: used_mask,
            out_in,
            out_pre,
            output: y[0],
        })
    }

    pub fn predict_one(&self, params: &[f64], x: &Sequence) -> Result<f64> {
        Ok(self.forward(params, x, None)?.output)
    }

    /// Accumulates `d output` = `dy` back through the cached pass into `grad`.
    pub fn backward(&self, params: &[f64], x: &Sequence, cache: &ForwardCache, dy: f64, grad: &mut [f64]) -> Result<()> {
        let (layer, at) = self.out;
        let n = layer.param_count();
        let mut d = layer.backward(&params[at..at + n], &cache.out_in, &cache.out_pre, &[dy], &mut grad[at..at + n]);

        if let Some((layer, at)) = self.dense {
            if let Some(m) = &cache.mask {
                d.iter_mut().zip(m).for_each(|(g, s)| *g *= s);
            }
            let n = layer.param_count();
            d = layer.backward(&params[at..at + n], &cache.features, &cache.dense_pre, &d, &mut grad[at..at + n]);
            ensure_finite(&d, "dense (backward)")?;
        }

        let steps = self.spec.input.steps;
        let width = self.conv.map_or(self.spec.input.channels, |(c, _)| c.filters);
        let mut d_seq = Sequence::zeros(steps, width);
        match self.recurrent {
            Some((Recurrent::Gru(cell), at)) => {
                let n = cell.param_count();
                let p = cell.view(&params[at..at + n]);
                let mut dh = d;
                for t in (0..steps).rev() {
                    let (dh_prev, dx) = cell.backward_step(&p, &cache.gru_steps[t], &dh, &mut grad[at..at + n]);
                    d_seq.row_mut(t).copy_from_slice(&dx);
                    dh = dh_prev;
                }
                ensure_finite(&dh, "gru (backward)")?;
            }
            Some((Recurrent::Rnn(cell), at)) => {
                let n = cell.param_count();
                let p = &params[at..at + n];
                let mut dh = d;
                for t in (0..steps).rev() {
                    let (dh_prev, dx) = cell.backward_step(p, &cache.rnn_steps[t], &dh, &mut grad[at..at + n]);
                    d_seq.row_mut(t).copy_from_slice(&dx);
                    dh = dh_prev;
                }
                ensure_finite(&dh, "rnn (backward)")?;
            }
            None => d_seq.data = d,
        }

        if let (Some((layer, at)), Some((_, conv_cache))) = (self.conv, &cache.conv) {
            let n = layer.param_count();
            layer.backward(x, conv_cache, &d_seq, &mut grad[at..at + n]);
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::non_finite(format!("gradient at parameter {i}")));
        }
        Ok(())
    }

    /// Mean Huber loss of a batch and its exact gradient. `masks`, when given,
    /// fixes one dropout mask per sample (train mode).
    pub fn loss_and_gradients(
        &self,
        params: &ParameterSet,
        inputs: &[Sequence],
        targets: &[f64],
        delta: f64,
        masks: Option<&[Vec<f64>]>,
    ) -> Result<(f64, Gradients)> {
        if inputs.len() != targets.len() {
            return Err(Error::invalid("batch inputs and targets differ in length"));
        }
        if let Some(m) = masks {
            if m.len() != inputs.len() {
                return Err(Error::invalid("one dropout mask per sample required"));
            }
        }
        let caches = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| self.forward(&params.values, x, masks.map(|m| m[i].as_slice())))
            .collect::<Result<Vec<_>>>()?;
        let preds: Vec<f64> = caches.iter().map(|c| c.output).collect();
        let loss = huber_loss(&preds, targets, delta)?;
        let dys = huber_grad(&preds, targets, delta)?;
        let mut grads = params.zero_grad();
        for ((x, cache), dy) in inputs.iter().zip(&caches).zip(dys) {
            self.backward(&params.values, x, cache, dy, &mut grads.0)?;
        }
        Ok((loss, grads))
    }
}

pub fn spec_for(kind: ModelKind, input: InputShape, hyper: &Hyper) -> ModelSpec {
    let gru = Some(RecurrentSpec {
        cell: CellKind::Gru,
        hidden: hyper.hidden,
    });
    match kind {
        ModelKind::Esdnn => ModelSpec {
            kind,
            input,
            conv: Some(ConvSpec {
                filters: hyper.conv_filters,
                kernel: hyper.conv_kernel,
                activation: Activation::Relu,
            }),
            recurrent: gru,
            dense: Some(DenseSpec {
                units: hyper.dense_units,
                activation: Activation::Swish { beta: hyper.swish_beta },
            }),
            dropout: hyper.dropout,
        },
        ModelKind::Gru => ModelSpec {
            kind,
            input,
            conv: None,
            recurrent: gru,
            dense: None,
            dropout: 0.0,
        },
        ModelKind::Rnn => ModelSpec {
            kind,
            input,
            conv: None,
            recurrent: Some(RecurrentSpec {
                cell: CellKind::SimpleRnn,
                hidden: hyper.hidden,
            }),
            dense: None,
            dropout: 0.0,
        },
        ModelKind::Linear => ModelSpec {
            kind,
            input,
            conv: None,
            recurrent: None,
            dense: None,
            dropout: 0.0,
        },
    }
}

/// Builds a model and Glorot-uniform initial weights (biases zero) from `seed`.
pub fn build_model(kind: ModelKind, input: InputShape, hyper: &Hyper, seed: u64) -> Result<(Model, ParameterSet)> {
    if !hyper.swish_beta.is_finite() {
        return Err(Error::invalid("swish beta must be finite"));
    }
    let model = Model::new(spec_for(kind, input, hyper))?;
    let layout = model.layout(hyper.recurrent_bias);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; model.param_count()];
    for t in &layout {
        let (fan_in, fan_out) = match t.shape.as_slice() {
            [_] => continue,
            [f, k, c] => (k * c, k * f),
            [rows, cols] => (*cols, *rows),
            _ => unreachable!("tensor ranks are 1-3"),
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut values[t.range()] {
            *v = rng.random_range(-limit..limit);
        }
    }
    let params = ParameterSet::new(layout, values)?;
    Ok((model, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(steps: usize, channels: usize) -> InputShape {
        InputShape { steps, channels }
    }

    #[test]
    fn esdnn_layer_widths() {
        let (m, p) = build_model(ModelKind::Esdnn, shape(1, 3), &Hyper::default(), 1).unwrap();
        let s = m.spec();
        assert_eq!(s.conv.unwrap().filters, 32);
        assert_eq!(s.conv.unwrap().kernel, 5);
        assert_eq!(s.dense.unwrap().units, 16);
        assert_eq!(s.dropout, 0.2);
        assert_eq!(p.tensor("out.w").unwrap().len(), 16);
        assert_eq!(p.tensor("gru.w_r").unwrap().len(), 32 * 64);
        assert_eq!(p.len(), m.param_count());
    }

    #[test]
    fn same_seed_same_params() {
        let a = build_model(ModelKind::Esdnn, shape(2, 3), &Hyper::default(), 9).unwrap().1;
        let b = build_model(ModelKind::Esdnn, shape(2, 3), &Hyper::default(), 9).unwrap().1;
        let c = build_model(ModelKind::Esdnn, shape(2, 3), &Hyper::default(), 10).unwrap().1;
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rnn_has_no_gates() {
        let (_, p) = build_model(ModelKind::Rnn, shape(3, 2), &Hyper::default(), 0).unwrap();
        assert!(p.layout.iter().all(|t| !t.name.starts_with("gru")));
        assert!(p.tensor("rnn.w").is_some());
    }

    #[test]
    fn unknown_kind() {
        assert!("lstm".parse::<ModelKind>().is_err());
        assert_eq!("gru".parse::<ModelKind>().unwrap(), ModelKind::Gru);
    }

    #[test]
    fn invalid_hyper() {
        let h = Hyper { hidden: 0, ..Hyper::default() };
        assert!(build_model(ModelKind::Gru, shape(1, 1), &h, 0).is_err());
        let h = Hyper { dropout: 1.0, ..Hyper::default() };
        assert!(build_model(ModelKind::Esdnn, shape(1, 1), &h, 0).is_err());
    }

    #[test]
    fn zero_weights_predict_output_bias() {
        for kind in ModelKind::ALL {
            let (m, mut p) = build_model(kind, shape(2, 2), &Hyper::default(), 3).unwrap();
            p.values.iter_mut().for_each(|v| *v = 0.0);
            p.tensor_mut("out.b").unwrap()[0] = 0.37;
            let x = m.input_from_row(&[0.1, 0.9, -0.3, 0.4]).unwrap();
            assert_eq!(m.predict_one(&p.values, &x).unwrap(), 0.37);
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let (m, mut p) = build_model(ModelKind::Esdnn, shape(2, 2), &Hyper::default(), 3).unwrap();
        p.values.iter_mut().for_each(|v| *v = 0.0);
        let xs = vec![m.input_from_row(&[0.0; 4]).unwrap(); 3];
        let (loss, g) = m.loss_and_gradients(&p, &xs, &[0.0; 3], 1.0, None).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_model_closed_form_gradient() {
        // dL/dw_j = mean(e * x_j), dL/db = mean(e) in the quadratic regime.
        let (m, mut p) = build_model(ModelKind::Linear, shape(1, 2), &Hyper::default(), 0).unwrap();
        p.values = vec![0.2, -0.1, 0.05];
        let rows = [[0.5, 0.25], [0.1, 0.9], [0.7, 0.3]];
        let targets = [0.1, 0.0, 0.2];
        let xs: Vec<_> = rows.iter().map(|r| m.input_from_row(r).unwrap()).collect();
        let (_, g) = m.loss_and_gradients(&p, &xs, &targets, 1.0, None).unwrap();
        let n = rows.len() as f64;
        let e: Vec<f64> = rows
            .iter()
            .zip(targets)
            .map(|(r, t)| 0.2 * r[0] - 0.1 * r[1] + 0.05 - t)
            .collect();
        let want = [
            e.iter().zip(&rows).map(|(e, r)| e * r[0]).sum::<f64>() / n,
            e.iter().zip(&rows).map(|(e, r)| e * r[1]).sum::<f64>() / n,
            e.iter().sum::<f64>() / n,
        ];
        for (a, b) in g.0.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_forward_names_layer() {
        let (m, mut p) = build_model(ModelKind::Linear, shape(1, 1), &Hyper::default(), 0).unwrap();
        p.values[0] = f64::MAX;
        let x = m.input_from_row(&[10.0]).unwrap();
        match m.predict_one(&p.values, &x) {
            Err(Error::NonFinite { layer }) => assert_eq!(layer, "output"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frozen_recurrent_bias() {
        let h = Hyper { recurrent_bias: false, ..Hyper::default() };
        let (_, p) = build_model(ModelKind::Gru, shape(1, 2), &h, 0).unwrap();
        let frozen: Vec<_> = p.layout.iter().filter(|t| !t.trainable).map(|t| t.name.as_str()).collect();
        assert_eq!(frozen, ["gru.b_r", "gru.b_z", "gru.b_h"]);
        assert!(p.tensor("gru.b_z").unwrap().iter().all(|&b| b == 0.0));
    }
}
