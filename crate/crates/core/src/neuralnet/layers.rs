//! Layer primitives with hand-derived reverse passes.
//!
//! Every layer reads its parameters from one contiguous slice of the flat
//! parameter buffer and accumulates gradients into a slice of the same shape.
//! Matrices are row-major `[rows][cols]`.

use rand::Rng;

use super::activation::{sigmoid, Activation};
use crate::error::{Error, Result};

/// A `steps x width` row-major sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub steps: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Sequence {
    pub fn new(steps: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != steps * width {
            return Err(Error::invalid(format!(
                "sequence of {steps}x{width} needs {} values, got {}",
                steps * width,
                data.len()
            )));
        }
        Ok(Sequence { steps, width, data })
    }

    pub fn zeros(steps: usize, width: usize) -> Self {
        Sequence {
            steps,
            width,
            data: vec![0.0; steps * width],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("ragged sequence rows"));
        }
        Ok(Sequence {
            steps: rows.len(),
            width,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }
}

/// `out += W x`.
#[inline]
fn gemv_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T dy`.
#[inline]
fn gemv_t_acc(w: &[f64], cols: usize, dy: &[f64], dx: &mut [f64]) {
    for (g, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (d, a) in dx.iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// `dW += dy x^T`.
#[inline]
fn outer_acc(dw: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) {
    for (g, row) in dy.iter().zip(dw.chunks_exact_mut(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (d, a) in row.iter_mut().zip(x) {
            *d += g * a;
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

// --- causal 1-D convolution -------------------------------------------------

/// Causal convolution: each output step sees the current and `kernel - 1`
/// previous input steps, with zeros before the sequence start.
///
/// Parameters: kernel `[filters][kernel][channels]`, then bias `[filters]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalConv1d {
    pub channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    pre: Sequence,
}

impl CausalConv1d {
    pub fn param_count(&self) -> usize {
        self.filters * self.kernel * self.channels + self.filters
    }

    fn forward_pre(&self, p: &[f64], x: &Sequence) -> Sequence {
        let (c, k, f) = (self.channels, self.kernel, self.filters);
        let (kernels, bias) = p.split_at(f * k * c);
        let mut pre = Sequence::zeros(x.steps, f);
        for t in 0..x.steps {
            let out = pre.row_mut(t);
            out.copy_from_slice(bias);
            for i in 0..k {
                // input index t - (k - 1) + i
                let Some(src) = (t + i + 1).checked_sub(k) else {
                    continue;
                };
                let xin = x.row(src);
                for (fi, o) in out.iter_mut().enumerate() {
                    let w = &kernels[(fi * k + i) * c..(fi * k + i + 1) * c];
                    *o += w.iter().zip(xin).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        pre
    }

    pub fn forward(&self, p: &[f64], x: &Sequence) -> (Sequence, ConvCache) {
        let pre = self.forward_pre(p, x);
        let mut out = pre.clone();
        out.data.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        (out, ConvCache { pre })
    }

    /// Accumulates parameter gradients; the input gradient is not needed
    /// because the convolution always sits directly on the data.
    pub fn backward(&self, x: &Sequence, cache: &ConvCache, dy: &Sequence, grad: &mut [f64]) {
        let (c, k, f) = (self.channels, self.kernel, self.filters);
        let (dk, db) = grad.split_at_mut(f * k * c);
        for t in 0..x.steps {
            let dpre: Vec<f64> = dy
                .row(t)
                .iter()
                .zip(cache.pre.row(t))
                .map(|(g, z)| g * self.activation.derivative(*z))
                .collect();
            for (b, g) in db.iter_mut().zip(&dpre) {
                *b += g;
            }
            for i in 0..k {
                let Some(src) = (t + i + 1).checked_sub(k) else {
                    continue;
                };
                let xin = x.row(src);
                for (fi, g) in dpre.iter().enumerate() {
                    if *g == 0.0 {
                        continue;
                    }
                    let w = &mut dk[(fi * k + i) * c..(fi * k + i + 1) * c];
                    for (d, a) in w.iter_mut().zip(xin) {
                        *d += g * a;
                    }
                }
            }
        }
    }
}

/// Causal relu convolution over an explicit kernel `[filters][kernel][channels]`.
pub fn conv1d_causal_forward(input: &Sequence, kernels: &[f64], biases: &[f64], kernel_size: usize) -> Result<Sequence> {
    if kernel_size == 0 || input.steps == 0 {
        return Err(Error::invalid("convolution needs kernel_size >= 1 and a non-empty input"));
    }
    let filters = biases.len();
    check_len("conv kernels", kernels.len(), filters * kernel_size * input.width)?;
    let layer = CausalConv1d {
        channels: input.width,
        filters,
        kernel: kernel_size,
        activation: Activation::Relu,
    };
    let p = [kernels, biases].concat();
    Ok(layer.forward(&p, input).0)
}

// --- GRU ---------------------------------------------------------------------

/// Gated recurrent unit acting on `[h_prev, x]`.
///
/// Parameters: `W_r`, `W_z`, `W_h` each `[hidden][hidden + input]`, then
/// biases `b_r`, `b_z`, `b_h` each `[hidden]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
}

/// Borrowed view of one GRU parameter block.
#[derive(Debug, Clone, Copy)]
pub struct GruParams<'a> {
    pub w_r: &'a [f64],
    pub w_z: &'a [f64],
    pub w_h: &'a [f64],
    pub b_r: &'a [f64],
    pub b_z: &'a [f64],
    pub b_h: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct GruStep {
    /// `[h_prev, x]`
    concat: Vec<f64>,
    /// `[r * h_prev, x]`
    gated: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    cand: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCell {
    pub fn param_count(&self) -> usize {
        let (h, n) = (self.hidden, self.hidden + self.input);
        3 * h * n + 3 * h
    }

    pub fn view<'a>(&self, p: &'a [f64]) -> GruParams<'a> {
        let m = self.hidden * (self.hidden + self.input);
        let h = self.hidden;
        let (w_r, rest) = p.split_at(m);
        let (w_z, rest) = rest.split_at(m);
        let (w_h, rest) = rest.split_at(m);
        let (b_r, rest) = rest.split_at(h);
        let (b_z, b_h) = rest.split_at(h);
        GruParams {
            w_r,
            w_z,
            w_h,
            b_r,
            b_z,
            b_h,
        }
    }

    pub fn step(&self, p: &GruParams<'_>, x: &[f64], h_prev: &[f64]) -> GruStep {
        let (h, n) = (self.hidden, self.hidden + self.input);
        let mut concat = Vec::with_capacity(n);
        concat.extend_from_slice(h_prev);
        concat.extend_from_slice(x);

        let mut r = p.b_r.to_vec();
        gemv_acc(p.w_r, n, &concat, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut z = p.b_z.to_vec();
        gemv_acc(p.w_z, n, &concat, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut gated = concat.clone();
        for j in 0..h {
            gated[j] *= r[j];
        }
        let mut cand = p.b_h.to_vec();
        gemv_acc(p.w_h, n, &gated, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());

        let hnew = (0..h).map(|j| (1.0 - z[j]) * h_prev[j] + z[j] * cand[j]).collect();
        GruStep {
            concat,
            gated,
            r,
            z,
            cand,
            h: hnew,
        }
    }

    /// Backpropagates `dh` through one step. Parameter gradients are
    /// accumulated into `grad`; returns `(dh_prev, dx)`.
    pub fn backward_step(&self, p: &GruParams<'_>, s: &GruStep, dh: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let (h, n) = (self.hidden, self.hidden + self.input);
        let m = h * n;
        let (g_wr, rest) = grad.split_at_mut(m);
        let (g_wz, rest) = rest.split_at_mut(m);
        let (g_wh, rest) = rest.split_at_mut(m);
        let (g_br, rest) = rest.split_at_mut(h);
        let (g_bz, g_bh) = rest.split_at_mut(h);
        let h_prev = &s.concat[..h];

        let mut d_concat = vec![0.0; n];
        let mut d_cand_pre = vec![0.0; h];
        let mut d_z_pre = vec![0.0; h];
        for j in 0..h {
            d_concat[j] = dh[j] * (1.0 - s.z[j]);
            let dz = dh[j] * (s.cand[j] - h_prev[j]);
            d_z_pre[j] = dz * s.z[j] * (1.0 - s.z[j]);
            let dc = dh[j] * s.z[j];
            d_cand_pre[j] = dc * (1.0 - s.cand[j] * s.cand[j]);
        }

        outer_acc(g_wh, n, &d_cand_pre, &s.gated);
        for (b, g) in g_bh.iter_mut().zip(&d_cand_pre) {
            *b += g;
        }
        let mut d_gated = vec![0.0; n];
        gemv_t_acc(p.w_h, n, &d_cand_pre, &mut d_gated);

        let mut d_r_pre = vec![0.0; h];
        for j in 0..h {
            d_concat[j] += d_gated[j] * s.r[j];
            let dr = d_gated[j] * h_prev[j];
            d_r_pre[j] = dr * s.r[j] * (1.0 - s.r[j]);
        }
        for j in h..n {
            d_concat[j] += d_gated[j];
        }

        outer_acc(g_wz, n, &d_z_pre, &s.concat);
        outer_acc(g_wr, n, &d_r_pre, &s.concat);
        for j in 0..h {
            g_bz[j] += d_z_pre[j];
            g_br[j] += d_r_pre[j];
        }
        gemv_t_acc(p.w_z, n, &d_z_pre, &mut d_concat);
        gemv_t_acc(p.w_r, n, &d_r_pre, &mut d_concat);

        let dx = d_concat.split_off(h);
        (d_concat, dx)
    }
}

pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], params: &GruParams<'_>) -> Result<Vec<f64>> {
    let hidden = h_prev.len();
    let input = x.len();
    let m = hidden * (hidden + input);
    for (name, got) in [("W_r", params.w_r.len()), ("W_z", params.w_z.len()), ("W", params.w_h.len())] {
        check_len(name, got, m)?;
    }
    for (name, got) in [("b_r", params.b_r.len()), ("b_z", params.b_z.len()), ("b", params.b_h.len())] {
        check_len(name, got, hidden)?;
    }
    Ok(GruCell { input, hidden }.step(params, x, h_prev).h)
}

// --- simple tanh recurrence --------------------------------------------------

/// `h = tanh(W [h_prev, x] + b)`; parameters `W [hidden][hidden + input]`, `b [hidden]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnnCell {
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct RnnStep {
    concat: Vec<f64>,
    pub h: Vec<f64>,
}

impl RnnCell {
    pub fn param_count(&self) -> usize {
        self.hidden * (self.hidden + self.input) + self.hidden
    }

    pub fn step(&self, p: &[f64], x: &[f64], h_prev: &[f64]) -> RnnStep {
        let n = self.hidden + self.input;
        let (w, b) = p.split_at(self.hidden * n);
        let mut concat = Vec::with_capacity(n);
        concat.extend_from_slice(h_prev);
        concat.extend_from_slice(x);
        let mut h = b.to_vec();
        gemv_acc(w, n, &concat, &mut h);
        h.iter_mut().for_each(|v| *v = v.tanh());
        RnnStep { concat, h }
    }

    pub fn backward_step(&self, p: &[f64], s: &RnnStep, dh: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden + self.input;
        let (w, _) = p.split_at(self.hidden * n);
        let (gw, gb) = grad.split_at_mut(self.hidden * n);
        let dpre: Vec<f64> = dh.iter().zip(&s.h).map(|(g, h)| g * (1.0 - h * h)).collect();
        outer_acc(gw, n, &dpre, &s.concat);
        for (b, g) in gb.iter_mut().zip(&dpre) {
            *b += g;
        }
        let mut d_concat = vec![0.0; n];
        gemv_t_acc(w, n, &dpre, &mut d_concat);
        let dx = d_concat.split_off(self.hidden);
        (d_concat, dx)
    }
}

// --- dense -------------------------------------------------------------------

/// `y = act(W x + b)`; parameters `W [units][input]`, `b [units]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub units: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn param_count(&self) -> usize {
        self.units * self.input + self.units
    }

    /// Returns `(pre_activation, output)`.
    pub fn forward(&self, p: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (w, b) = p.split_at(self.units * self.input);
        let mut pre = b.to_vec();
        gemv_acc(w, self.input, x, &mut pre);
        let out = pre.iter().map(|&v| self.activation.apply(v)).collect();
        (pre, out)
    }

    /// Returns the input gradient.
    pub fn backward(&self, p: &[f64], x: &[f64], pre: &[f64], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (w, _) = p.split_at(self.units * self.input);
        let (gw, gb) = grad.split_at_mut(self.units * self.input);
        let dpre: Vec<f64> = dy
            .iter()
            .zip(pre)
            .map(|(g, z)| g * self.activation.derivative(*z))
            .collect();
        outer_acc(gw, self.input, &dpre, x);
        for (b, g) in gb.iter_mut().zip(&dpre) {
            *b += g;
        }
        let mut dx = vec![0.0; self.input];
        gemv_t_acc(w, self.input, &dpre, &mut dx);
        dx
    }
}

/// `W` is row-major `[b.len()][x.len()]`.
pub fn dense_forward(x: &[f64], w: &[f64], b: &[f64], activation: Activation) -> Result<Vec<f64>> {
    check_len("dense weights", w.len(), b.len() * x.len())?;
    let layer = Dense {
        input: x.len(),
        units: b.len(),
        activation,
    };
    Ok(layer.forward(&[w, b].concat(), x).1)
}

// --- dropout -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-element scale factors: `0` for dropped units, `1 / (1 - rate)` for survivors.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub fn dropout<R: Rng + ?Sized>(x: &[f64], rate: f64, mode: Mode, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} must lie in [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask(x.len(), rate, rng);
    Ok(x.iter().zip(&mask).map(|(a, m)| a * m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conv_running_sum() {
        let x = Sequence::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let y = conv1d_causal_forward(&x, &[1.0; 5], &[0.0], 5).unwrap();
        assert_eq!(y.data, vec![1.0, 3.0, 6.0]);
    }

    #[test]
    fn conv_bias_and_relu() {
        let x = Sequence::new(4, 2, vec![0.3, -1.0, 2.0, 0.5, 1.0, 1.0, -4.0, 2.0]).unwrap();
        let y = conv1d_causal_forward(&x, &[0.0; 6], &[0.5], 3).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.5));
        let x = Sequence::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(conv1d_causal_forward(&x, &[-1.0], &[0.0], 1).unwrap().data, vec![0.0]);
        assert!(conv1d_causal_forward(&x, &[1.0, 1.0], &[0.0], 1).is_err());
    }

    #[test]
    fn conv_is_causal() {
        let layer = CausalConv1d {
            channels: 2,
            filters: 3,
            kernel: 4,
            activation: Activation::Linear,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..layer.param_count()).map(|_| rng.random::<f64>() - 0.5).collect();
        let x: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let base = layer.forward(&p, &Sequence::new(6, 2, x.clone()).unwrap()).0;
        for future in 1..6 {
            let mut x2 = x.clone();
            x2[future * 2] += 10.0;
            x2[future * 2 + 1] -= 3.0;
            let y = layer.forward(&p, &Sequence::new(6, 2, x2).unwrap()).0;
            assert_eq!(&y.data[..future * 3], &base.data[..future * 3]);
            assert_ne!(&y.data[future * 3..], &base.data[future * 3..]);
        }
    }

    fn zero_gru(hidden: usize, input: usize) -> Vec<f64> {
        vec![0.0; GruCell { input, hidden }.param_count()]
    }

    #[test]
    fn gru_zero_weights() {
        let cell = GruCell { input: 1, hidden: 1 };
        let p = zero_gru(1, 1);
        let v = cell.view(&p);
        assert_eq!(gru_cell_forward(&[3.0], &[1.0], &v).unwrap(), vec![0.5]);
        assert_eq!(gru_cell_forward(&[-2.0], &[0.0], &v).unwrap(), vec![0.0]);
    }

    #[test]
    fn gru_scalar_step_through() {
        // rows are [h | x] = [0 | 1]
        let w = [0.0, 1.0];
        let zero = [0.0];
        let v = GruParams {
            w_r: &w,
            w_z: &w,
            w_h: &w,
            b_r: &zero,
            b_z: &zero,
            b_h: &zero,
        };
        let h = gru_cell_forward(&[1.0], &[0.0], &v).unwrap()[0];
        let (s1, t1) = (0.731058578630, 0.761594155956);
        assert!((h - s1 * t1).abs() < 1e-9, "{h}");
        assert!((h - 0.5568).abs() < 1e-4);
    }

    #[test]
    fn gru_rejects_bad_shapes() {
        let p = zero_gru(2, 1);
        let v = GruCell { input: 1, hidden: 2 }.view(&p);
        assert!(gru_cell_forward(&[1.0, 2.0], &[0.0, 0.0], &v).is_err());
    }

    #[test]
    fn gru_without_bias_matches_concatenated_form() {
        let (hidden, input) = (3, 2);
        let cell = GruCell { input, hidden };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p: Vec<f64> = (0..cell.param_count()).map(|_| rng.random::<f64>() - 0.5).collect();
        let m = hidden * (hidden + input);
        p[3 * m..].iter_mut().for_each(|b| *b = 0.0);
        let x = [0.7, -0.2];
        let hp = [0.1, -0.4, 0.9];
        let ours = gru_cell_forward(&x, &hp, &cell.view(&p)).unwrap();

        let mat = |k: usize, r: usize, v: &[f64]| -> f64 { (0..hidden + input).map(|c| p[k * m + r * (hidden + input) + c] * v[c]).sum() };
        let hx: Vec<f64> = hp.iter().chain(&x).copied().collect();
        let r: Vec<f64> = (0..hidden).map(|j| sigmoid(mat(0, j, &hx))).collect();
        let z: Vec<f64> = (0..hidden).map(|j| sigmoid(mat(1, j, &hx))).collect();
        let rhx: Vec<f64> = (0..hidden).map(|j| r[j] * hp[j]).chain(x).collect();
        for j in 0..hidden {
            let cand = mat(2, j, &rhx).tanh();
            let want = (1.0 - z[j]) * hp[j] + z[j] * cand;
            assert!((ours[j] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn gru_output_between_previous_and_candidate() {
        let cell = GruCell { input: 2, hidden: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p: Vec<f64> = (0..cell.param_count()).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
            let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let hp: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let s = cell.step(&cell.view(&p), &x, &hp);
            for ((&h, &c), &prev) in s.h.iter().zip(&s.cand).zip(&hp) {
                let (lo, hi) = if prev < c { (prev, c) } else { (c, prev) };
                assert!(h >= lo - 1e-15 && h <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn dense_examples() {
        let x = [0.3, -1.2];
        let y = dense_forward(&x, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], Activation::Linear).unwrap();
        assert_eq!(y, x.to_vec());
        let y = dense_forward(&[0.0], &[1.0], &[0.0], Activation::swish()).unwrap();
        assert_eq!(y, vec![0.0]);
        let y = dense_forward(&[1.0], &[1.0], &[0.0], Activation::swish()).unwrap();
        assert!((y[0] - 0.731059).abs() < 1e-6);
        assert!(dense_forward(&[1.0], &[1.0, 2.0], &[0.0], Activation::Linear).is_err());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(dropout(&x, 0.2, Mode::Infer, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_survivor_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = vec![1.0; 10_000];
        let y = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let survivors = y.iter().filter(|&&v| v != 0.0).count() as f64 / 1e4;
        assert!((survivors - 0.5).abs() < 0.05, "{survivors}");
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
