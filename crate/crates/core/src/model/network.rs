use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CellKind, ModelConfig, TrainManifest};
use crate::dataset::{LabeledWindow, NormalizerParams, TrainingWindow};
use crate::deadreckon::Calibration;
use crate::error::{Error, Result};
use crate::geodesy::ErrorLabel;

/// Named row-major matrix, the unit of the model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// All trainable parameters. Gate blocks are stacked along the rows of
/// `kernel`, `recurrent` and `bias`: `[z, r, n]` for the GRU and
/// `[i, f, g, o]` for the LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    /// `(gates * hidden) x input_dim`
    pub kernel: Vec<f64>,
    /// `(gates * hidden) x hidden`, empty for the feed-forward cell.
    pub recurrent: Vec<f64>,
    pub bias: Vec<f64>,
    /// `1 x hidden`
    pub output: Vec<f64>,
    pub output_bias: f64,
}

const TENSOR_NAMES: [&str; 5] = ["kernel", "recurrent_kernel", "bias", "output_kernel", "output_bias"];

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let gh = cfg.cell.gates() * cfg.hidden;
        Weights {
            kernel: vec![0.0; gh * cfg.input_dim],
            recurrent: if cfg.cell.is_recurrent() { vec![0.0; gh * cfg.hidden] } else { Vec::new() },
            bias: vec![0.0; gh],
            output: vec![0.0; cfg.hidden],
            output_bias: 0.0,
        }
    }

    /// Glorot-uniform matrices and zero biases, except the LSTM forget gate
    /// whose bias starts at 1.
    pub fn glorot(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut w = Weights::zeros(cfg);
        let h = cfg.hidden;
        let uniform = |data: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut dyn rand::RngCore| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in data {
                *v = rng.random_range(-limit..limit);
            }
        };
        for block in w.kernel.chunks_mut(h * cfg.input_dim) {
            uniform(block, cfg.input_dim, h, rng);
        }
        for block in w.recurrent.chunks_mut(h * h) {
            uniform(block, h, h, rng);
        }
        uniform(&mut w.output, h, 1, rng);
        if cfg.cell == CellKind::Lstm {
            w.bias[h..2 * h].fill(1.0);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slices(&self) -> [&[f64]; 5] {
        [&self.kernel, &self.recurrent, &self.bias, &self.output, std::slice::from_ref(&self.output_bias)]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.kernel,
            &mut self.recurrent,
            &mut self.bias,
            &mut self.output,
            std::slice::from_mut(&mut self.output_bias),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn fill(&mut self, value: f64) {
        for s in self.slices_mut() {
            s.fill(value);
        }
    }

    pub fn to_tensors(&self, cfg: &ModelConfig) -> Vec<Tensor> {
        let gh = cfg.cell.gates() * cfg.hidden;
        let shapes = [(gh, cfg.input_dim), (gh, cfg.hidden), (gh, 1), (1, cfg.hidden), (1, 1)];
        TENSOR_NAMES
            .iter()
            .zip(shapes)
            .zip(self.slices())
            .filter(|(_, data)| !data.is_empty())
            .map(|((name, (rows, cols)), data)| Tensor { name: name.to_string(), rows, cols, data: data.to_vec() })
            .collect()
    }

    pub fn from_tensors(cfg: &ModelConfig, tensors: &[Tensor]) -> Result<Self> {
        let mut w = Weights::zeros(cfg);
        let expected = w.to_tensors(cfg);
        if tensors.len() != expected.len() {
            return Err(Error::Shape { expected: expected.len(), got: tensors.len() });
        }
        for (want, got) in expected.iter().zip(tensors) {
            if want.name != got.name {
                return Err(Error::Schema(format!("expected tensor `{}`, found `{}`", want.name, got.name)));
            }
            if (want.rows, want.cols) != (got.rows, got.cols) || got.data.len() != want.data.len() {
                return Err(Error::Shape { expected: want.data.len(), got: got.data.len() });
            }
        }
        let mut it = tensors.iter();
        for slot in w.slices_mut() {
            if !slot.is_empty() {
                slot.copy_from_slice(&it.next().expect("count checked").data);
            }
        }
        if !w.is_finite() {
            return Err(Error::InvalidInput("model weights must be finite".into()));
        }
        Ok(w)
    }
}

/// Recurrent state carried between windows. `c` is only used by the LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let c = if cfg.cell == CellKind::Lstm { cfg.hidden } else { 0 };
        CellState { h: vec![0.0; cfg.hidden], c: vec![0.0; c] }
    }

    pub fn reset(&mut self) {
        self.h.fill(0.0);
        self.c.fill(0.0);
    }
}

/// Intermediate values of one forward step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gate values, laid out like the bias.
    pub gates: Vec<f64>,
    /// GRU only: `r * h_prev`.
    pub rh: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    /// Hidden output before dropout; this is the state passed on.
    pub h: Vec<f64>,
    /// Hidden output after dropout, fed to the linear head.
    pub h_out: Vec<f64>,
    pub mask: Option<Vec<f64>>,
    pub pred: f64,
}

impl StepCache {
    pub fn next_state(&self) -> CellState {
        CellState { h: self.h.clone(), c: self.c.clone() }
    }
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// `out[r] += sum_k m[r * cols + k] * v[k]` for `r` in `rows`.
fn matvec_acc(m: &[f64], cols: usize, rows: std::ops::Range<usize>, v: &[f64], out: &mut [f64]) {
    for r in rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `m[r * cols + k] += d[r] * v[k]` for every row.
fn outer_acc(m: &mut [f64], cols: usize, d: &[f64], v: &[f64]) {
    for (r, &dr) in d.iter().enumerate() {
        if dr == 0.0 {
            continue;
        }
        for (a, &b) in m[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *a += dr * b;
        }
    }
}

/// Inverted-dropout mask: each unit survives with probability `1 - rate`
/// and survivors are scaled by `1 / (1 - rate)`.
pub fn dropout_mask(rng: &mut impl Rng, hidden: usize, rate: f64) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; hidden];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..hidden).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

/// A trained (or freshly initialized) error predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    pub config: ModelConfig,
    pub weights: Weights,
    /// Fitted on the training windows; required for prediction.
    pub normalizer: Option<NormalizerParams>,
    /// Wheel radius the training labels were computed with.
    pub calibration: Calibration,
    pub manifest: Option<TrainManifest>,
}

impl NetworkModel {
    pub fn new(config: ModelConfig, calibration: Calibration) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = Weights::glorot(&config, &mut rng);
        Ok(NetworkModel { config, weights, normalizer: None, calibration, manifest: None })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    /// One step on an already normalized input. `mask` applies dropout.
    pub fn forward(&self, x: &[f64], state: &CellState, mask: Option<&[f64]>) -> Result<StepCache> {
        let cfg = &self.config;
        let (n_in, h) = (cfg.input_dim, cfg.hidden);
        if x.len() != n_in {
            return Err(Error::Shape { expected: n_in, got: x.len() });
        }
        if state.h.len() != h {
            return Err(Error::Shape { expected: h, got: state.h.len() });
        }
        if let Some(m) = mask {
            if m.len() != h {
                return Err(Error::Shape { expected: h, got: m.len() });
            }
        }
        let w = &self.weights;
        let gh = cfg.cell.gates() * h;
        let mut pre = w.bias.clone();
        matvec_acc(&w.kernel, n_in, 0..gh, x, &mut pre);

        let h_prev = if cfg.cell.is_recurrent() { state.h.clone() } else { vec![0.0; h] };
        let c_prev = if cfg.cell == CellKind::Lstm { state.c.clone() } else { Vec::new() };
        let mut rh = Vec::new();
        let mut c = Vec::new();
        let mut tanh_c = Vec::new();
        let mut gates = vec![0.0; gh];
        let mut hidden = vec![0.0; h];

        match cfg.cell {
            CellKind::Srnn | CellKind::Idnn => {
                if cfg.cell == CellKind::Srnn {
                    matvec_acc(&w.recurrent, h, 0..h, &h_prev, &mut pre);
                }
                for j in 0..h {
                    gates[j] = pre[j].tanh();
                }
                hidden.copy_from_slice(&gates);
            }
            CellKind::Gru => {
                matvec_acc(&w.recurrent, h, 0..2 * h, &h_prev, &mut pre);
                for j in 0..2 * h {
                    gates[j] = sigmoid(pre[j]);
                }
                rh = (0..h).map(|j| gates[h + j] * h_prev[j]).collect();
                matvec_acc(&w.recurrent, h, 2 * h..3 * h, &rh, &mut pre);
                for j in 0..h {
                    let n = pre[2 * h + j].tanh();
                    gates[2 * h + j] = n;
                    let z = gates[j];
                    hidden[j] = z * h_prev[j] + (1.0 - z) * n;
                }
            }
            CellKind::Lstm => {
                matvec_acc(&w.recurrent, h, 0..gh, &h_prev, &mut pre);
                for (k, g) in gates.iter_mut().enumerate() {
                    *g = if (2 * h..3 * h).contains(&k) { pre[k].tanh() } else { sigmoid(pre[k]) };
                }
                c = (0..h).map(|j| gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j]).collect();
                tanh_c = c.iter().map(|v| v.tanh()).collect();
                for j in 0..h {
                    hidden[j] = gates[3 * h + j] * tanh_c[j];
                }
            }
        }

        let h_out: Vec<f64> = match mask {
            Some(m) => hidden.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => hidden.clone(),
        };
        let pred = w.output_bias + w.output.iter().zip(&h_out).map(|(a, b)| a * b).sum::<f64>();
        Ok(StepCache {
            x: x.to_vec(),
            h_prev,
            c_prev,
            gates,
            rh,
            c,
            tanh_c,
            h: hidden,
            h_out,
            mask: mask.map(<[f64]>::to_vec),
            pred,
        })
    }

    /// Accumulate `dpred * d(pred)/d(weights)` into `grads`. The incoming
    /// state is treated as a constant.
    pub fn backward(&self, cache: &StepCache, dpred: f64, grads: &mut Weights) {
        let cfg = &self.config;
        let (n_in, h) = (cfg.input_dim, cfg.hidden);
        let w = &self.weights;

        grads.output_bias += dpred;
        for (g, v) in grads.output.iter_mut().zip(&cache.h_out) {
            *g += dpred * v;
        }
        let dh: Vec<f64> = (0..h)
            .map(|j| dpred * w.output[j] * cache.mask.as_ref().map_or(1.0, |m| m[j]))
            .collect();

        let gates = &cache.gates;
        let mut da = vec![0.0; cfg.cell.gates() * h];
        match cfg.cell {
            CellKind::Srnn | CellKind::Idnn => {
                for j in 0..h {
                    da[j] = dh[j] * (1.0 - gates[j] * gates[j]);
                }
            }
            CellKind::Gru => {
                for j in 0..h {
                    let (z, n) = (gates[j], gates[2 * h + j]);
                    da[j] = dh[j] * (cache.h_prev[j] - n) * z * (1.0 - z);
                    da[2 * h + j] = dh[j] * (1.0 - z) * (1.0 - n * n);
                }
                // d(pred)/d(r * h_prev) = U_n^T da_n
                let mut drh = vec![0.0; h];
                for j in 0..h {
                    let dn = da[2 * h + j];
                    if dn == 0.0 {
                        continue;
                    }
                    let row = &w.recurrent[(2 * h + j) * h..(2 * h + j + 1) * h];
                    for (d, u) in drh.iter_mut().zip(row) {
                        *d += dn * u;
                    }
                }
                for j in 0..h {
                    let r = gates[h + j];
                    da[h + j] = drh[j] * cache.h_prev[j] * r * (1.0 - r);
                }
            }
            CellKind::Lstm => {
                for j in 0..h {
                    let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let tc = cache.tanh_c[j];
                    let dc = dh[j] * o * (1.0 - tc * tc);
                    da[j] = dc * g * i * (1.0 - i);
                    da[h + j] = dc * cache.c_prev[j] * f * (1.0 - f);
                    da[2 * h + j] = dc * i * (1.0 - g * g);
                    da[3 * h + j] = dh[j] * tc * o * (1.0 - o);
                }
            }
        }

        for (g, d) in grads.bias.iter_mut().zip(&da) {
            *g += d;
        }
        outer_acc(&mut grads.kernel, n_in, &da, &cache.x);
        match cfg.cell {
            CellKind::Idnn => {}
            CellKind::Gru => {
                let (zr, n) = grads.recurrent.split_at_mut(2 * h * h);
                outer_acc(zr, h, &da[..2 * h], &cache.h_prev);
                outer_acc(n, h, &da[2 * h..], &cache.rh);
            }
            CellKind::Srnn | CellKind::Lstm => outer_acc(&mut grads.recurrent, h, &da, &cache.h_prev),
        }
    }

    fn normalizer(&self) -> Result<&NormalizerParams> {
        self.normalizer.as_ref().ok_or(Error::MissingNormalizer)
    }

    /// Stateful predictor over raw (unnormalized) feature vectors.
    pub fn stream(&self) -> Result<Stream<'_>> {
        let norm = self.normalizer()?;
        if norm.dim() != self.config.input_dim {
            return Err(Error::Shape { expected: self.config.input_dim, got: norm.dim() });
        }
        Ok(Stream { model: self, norm, state: CellState::zeros(&self.config), scaled: vec![0.0; norm.dim()] })
    }

    /// Predicted error for every window, in order. State is reset whenever
    /// the run changes; a stateless model resets before every window.
    pub fn predict_windows(&self, windows: &[LabeledWindow]) -> Result<Vec<f64>> {
        let mut stream = self.stream()?;
        let mut out = Vec::with_capacity(windows.len());
        let mut run = None;
        for w in windows {
            if run != Some(w.run) {
                stream.reset();
                run = Some(w.run);
            }
            out.push(stream.predict(&w.window.x)?);
        }
        Ok(out)
    }
}

/// Carries recurrent state across consecutive windows.
#[derive(Debug)]
pub struct Stream<'a> {
    model: &'a NetworkModel,
    norm: &'a NormalizerParams,
    state: CellState,
    scaled: Vec<f64>,
}

impl Stream<'_> {
    pub fn predict(&mut self, raw: &[f64]) -> Result<f64> {
        self.norm.apply_into(raw, &mut self.scaled)?;
        let cache = self.model.forward(&self.scaled, &self.state, None)?;
        if self.model.config.stateful {
            self.state = cache.next_state();
        }
        Ok(cache.pred)
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }

    pub fn state(&self) -> &CellState {
        &self.state
    }
}

/// Predicted error for a single window from a zero state.
pub fn predict_error(model: &NetworkModel, window: &TrainingWindow) -> Result<ErrorLabel> {
    Ok(ErrorLabel(model.stream()?.predict(&window.x)?))
}
