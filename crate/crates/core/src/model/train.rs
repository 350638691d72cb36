use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamax::Adamax;
use super::network::{dropout_mask, CellState, NetworkModel, Weights};
use super::{ModelConfig, TrainConfig};
use crate::dataset::{LabeledWindow, NormalizerParams};
use crate::deadreckon::Calibration;
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

/// Provenance stored alongside trained weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub train_config: TrainConfig,
    pub data_sha256: String,
    pub n_windows: usize,
    /// Inference-mode MAE before the first update, meters.
    pub initial_loss: f64,
    /// Inference-mode MAE after the last epoch, meters.
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossTrace {
    pub initial: f64,
    /// Training-mode (dropout on) MAE of each epoch.
    pub epochs: Vec<f64>,
    pub final_eval: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    pub trace: LossTrace,
}

pub fn mae_loss(preds: &[f64], targets: &[f64]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64
}

/// Subgradient of `|p - t|`, zero at the kink.
fn mae_grad(p: f64, t: f64) -> f64 {
    let d = p - t;
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn data_fingerprint(windows: &[LabeledWindow]) -> String {
    let mut bytes = Vec::with_capacity(windows.len() * (8 * 42));
    for w in windows {
        for v in w.window.x.iter().chain([&w.window.y.0]) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&(w.run as u64).to_le_bytes());
    }
    sha256_hex(&bytes)
}

/// Split `n` samples into `streams` contiguous, near-equal ranges.
pub(crate) fn stream_bounds(n: usize, streams: usize) -> Vec<std::ops::Range<usize>> {
    (0..streams).map(|s| s * n / streams..(s + 1) * n / streams).collect()
}

/// Fit a model to labeled windows.
///
/// Stateful models see the data as `batch_size` contiguous streams walked in
/// lockstep, so each batch row continues where it left off and the hidden
/// state can be carried from one step to the next. A stream picks up the
/// state its predecessor ended the previous epoch with, so state is only
/// zeroed where a new run begins, as it is during prediction.
/// Stateless models shuffle the windows every epoch and always start from a
/// zero state.
pub fn train(
    windows: &[LabeledWindow],
    calibration: Calibration,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::Empty("no training windows"));
    }
    let normalizer = NormalizerParams::fit(windows.iter().map(|w| &w.window))?;
    if normalizer.dim() != model_cfg.input_dim {
        return Err(Error::Shape { expected: model_cfg.input_dim, got: normalizer.dim() });
    }
    let mut model = NetworkModel::new(model_cfg.clone(), calibration)?;
    model.normalizer = Some(normalizer.clone());

    let xs: Vec<Vec<f64>> = windows.iter().map(|w| normalizer.apply(&w.window.x)).collect::<Result<_>>()?;
    let ys: Vec<f64> = windows.iter().map(|w| w.window.y.0).collect();
    let n = windows.len();

    let initial = mae_loss(&model.predict_windows(windows)?, &ys);
    let mut opt = Adamax::new(train_cfg, &model.weights);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut grads = Weights::zeros(model_cfg);
    let mut epochs = Vec::with_capacity(train_cfg.epochs);
    let rate = model_cfg.dropout_rate;
    let hidden = model_cfg.hidden;

    let mut carry: Option<Vec<CellState>> = None;
    for epoch in 0..train_cfg.epochs {
        let mut total = 0.0;
        if model_cfg.stateful {
            let bounds = stream_bounds(n, train_cfg.batch_size.min(n));
            let steps = bounds.iter().map(|b| b.len()).max().unwrap_or(0);
            // Each stream starts where the previous one ended last epoch.
            let mut states: Vec<CellState> = match carry.take() {
                Some(prev) => {
                    let mut v: Vec<CellState> = vec![CellState::zeros(model_cfg)];
                    v.extend(prev.into_iter().take(bounds.len() - 1));
                    v
                }
                None => bounds.iter().map(|_| CellState::zeros(model_cfg)).collect(),
            };
            for j in 0..steps {
                grads.fill(0.0);
                let active: Vec<usize> = (0..bounds.len()).filter(|&s| j < bounds[s].len()).collect();
                let scale = 1.0 / active.len() as f64;
                for &s in &active {
                    let idx = bounds[s].start + j;
                    if idx == 0 || windows[idx].run != windows[idx - 1].run {
                        states[s].reset();
                    }
                    let mask = dropout_mask(&mut rng, hidden, rate);
                    let cache = model.forward(&xs[idx], &states[s], Some(&mask))?;
                    total += (cache.pred - ys[idx]).abs();
                    model.backward(&cache, mae_grad(cache.pred, ys[idx]) * scale, &mut grads);
                    states[s] = cache.next_state();
                }
                opt.step(&mut model.weights, &grads);
            }
            carry = Some(states);
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let zero = CellState::zeros(model_cfg);
            for batch in order.chunks(train_cfg.batch_size) {
                grads.fill(0.0);
                let scale = 1.0 / batch.len() as f64;
                for &idx in batch {
                    let mask = dropout_mask(&mut rng, hidden, rate);
                    let cache = model.forward(&xs[idx], &zero, Some(&mask))?;
                    total += (cache.pred - ys[idx]).abs();
                    model.backward(&cache, mae_grad(cache.pred, ys[idx]) * scale, &mut grads);
                }
                opt.step(&mut model.weights, &grads);
            }
        }
        let loss = total / n as f64;
        if !loss.is_finite() || !model.weights.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        log::debug!("epoch {}/{}: mae {loss:.6}", epoch + 1, train_cfg.epochs);
        epochs.push(loss);
    }

    let final_eval = mae_loss(&model.predict_windows(windows)?, &ys);
    if !final_eval.is_finite() {
        return Err(Error::Divergence { epoch: train_cfg.epochs });
    }
    model.manifest = Some(TrainManifest {
        train_config: train_cfg.clone(),
        data_sha256: data_fingerprint(windows),
        n_windows: n,
        initial_loss: initial,
        final_loss: final_eval,
    });
    Ok(TrainOutcome { model, trace: LossTrace { initial, epochs, final_eval } })
}
