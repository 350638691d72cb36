//! Compact networks that predict the per-second odometry error.
//!
//! Every architecture is one hidden layer (dense or recurrent) followed by a
//! single linear output unit. A window's second of wheel-speed history is
//! flattened into the input vector, so recurrent cells take exactly one step
//! per window; their state is carried from one window to the next within a
//! segment when the model is stateful.

mod adamax;
mod io;
mod network;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::FEATURES;
use crate::error::{Error, Result};

pub use adamax::Adamax;
pub use io::{load_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use network::{dropout_mask, predict_error, CellState, NetworkModel, StepCache, Stream, Tensor, Weights};
pub use train::{mae_loss, train, LossTrace, TrainManifest, TrainOutcome};

/// Hidden-layer architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Simple recurrent: `h = tanh(W x + U h_prev + b)`.
    Srnn,
    /// Gated recurrent unit with the reset gate applied before the recurrent
    /// product (single bias per gate).
    Gru,
    Lstm,
    /// Feed-forward: `h = tanh(W x + b)`.
    Idnn,
}

impl CellKind {
    pub const ALL: [CellKind; 4] = [CellKind::Srnn, CellKind::Gru, CellKind::Lstm, CellKind::Idnn];

    /// Number of `hidden`-sized blocks in the kernel and bias.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Srnn | CellKind::Idnn => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != CellKind::Idnn
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Srnn => "srnn",
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
            CellKind::Idnn => "idnn",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CellKind::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown cell kind `{s}` (srnn, gru, lstm, idnn)")))
    }
}

/// Trainable parameters of a one-hidden-layer network with a scalar output.
pub fn param_count(cell: CellKind, input_dim: usize, hidden: usize) -> usize {
    let output = hidden + 1;
    let per_gate = if cell.is_recurrent() { hidden * (input_dim + hidden + 1) } else { hidden * (input_dim + 1) };
    cell.gates() * per_gate + output
}

pub const DEFAULT_HIDDEN: usize = 72;
pub const DEFAULT_DROPOUT: f64 = 0.05;
pub const DEFAULT_LEARNING_RATE: f64 = 0.0007;
pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_EPOCHS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub cell: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    /// Fraction of hidden activations dropped during training.
    pub dropout_rate: f64,
    /// Carry recurrent state across consecutive windows of a segment.
    pub stateful: bool,
    /// Seeds weight initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cell: CellKind::Srnn,
            input_dim: FEATURES,
            hidden: DEFAULT_HIDDEN,
            dropout_rate: DEFAULT_DROPOUT,
            stateful: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("input_dim and hidden must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        param_count(self.cell, self.input_dim, self.hidden)
    }
}

/// Mini-batch training with mean-absolute-error loss and the Adamax optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds dropout masks and (stateless mode) batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon >= 0.0) {
            return Err(Error::Config("betas must be in [0, 1) and epsilon non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trainable-parameter counts for widths 32, 48, 64, 72, 128, 256, 512.
    const PUBLISHED: [(CellKind, [usize; 7]); 4] = [
        (CellKind::Srnn, [2_369, 4_321, 6_785, 8_209, 21_761, 76_289, 283_649]),
        (CellKind::Gru, [7_041, 12_865, 20_225, 24_481, 65_025, 228_353, 849_921]),
        (CellKind::Lstm, [9_377, 17_137, 26_945, 32_617, 86_657, 304_385, 1_133_057]),
        (CellKind::Idnn, [1_345, 2_017, 2_689, 3_025, 5_377, 10_753, 21_505]),
    ];
    const WIDTHS: [usize; 7] = [32, 48, 64, 72, 128, 256, 512];

    #[test]
    fn param_count_examples() {
        assert_eq!(param_count(CellKind::Srnn, 40, 32), 2_369);
        assert_eq!(param_count(CellKind::Gru, 40, 64), 20_225);
        assert_eq!(param_count(CellKind::Lstm, 40, 128), 86_657);
        assert_eq!(param_count(CellKind::Idnn, 40, 512), 21_505);
    }

    #[test]
    fn param_count_full_table() {
        for (cell, counts) in PUBLISHED {
            for (h, n) in WIDTHS.iter().zip(counts) {
                assert_eq!(param_count(cell, FEATURES, *h), n, "{cell} / {h}");
            }
        }
    }

    #[test]
    fn only_forty_inputs_reproduce_the_srnn_count() {
        let fits: Vec<usize> = (1..200).filter(|&i| param_count(CellKind::Srnn, i, 32) == 2_369).collect();
        assert_eq!(fits, vec![40]);
    }

    #[test]
    fn defaults() {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        assert_eq!((m.input_dim, m.hidden, m.dropout_rate, m.cell), (40, 72, 0.05, CellKind::Srnn));
        assert_eq!((t.learning_rate, t.batch_size), (0.0007, 128));
        assert_eq!(m.param_count(), 8_209);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig { hidden: 0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { dropout_rate: 1.0, ..ModelConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn cell_names() {
        for c in CellKind::ALL {
            assert_eq!(c.name().parse::<CellKind>().unwrap(), c);
        }
        assert_eq!("SRNN".parse::<CellKind>().unwrap(), CellKind::Srnn);
        assert!("transformer".parse::<CellKind>().is_err());
    }
}
