//! Outage simulation and accumulated-error statistics.
//!
//! During a simulated outage the displacement for each second comes from the
//! odometry alone (physical) or from the odometry minus the predicted error
//! (corrected). Per-second errors are signed differences of displacement
//! magnitudes against GNSS, accumulated over the outage.

mod report;

use serde::{Deserialize, Serialize};

use crate::dataset::{build_recording_windows, split_outage_sequences, LabeledWindow, OutageLength, Recording, WindowOptions};
use crate::deadreckon::Calibration;
use crate::error::{Error, Result};
use crate::model::NetworkModel;

pub use report::{render_text, trajectory_geojson, write_csv, CSV_HEADER};

/// Cumulative root squared error: `sum(sqrt(e^2))`, i.e. the summed
/// absolute error.
pub fn crse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("crse of an empty sequence"));
    }
    Ok(errors.iter().map(|e| (e * e).sqrt()).sum())
}

/// Cumulative signed error.
pub fn cte(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("cte of an empty sequence"));
    }
    Ok(errors.iter().sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Physical,
    Corrected,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Physical, Method::Corrected];

    pub fn name(self) -> &'static str {
        match self {
            Method::Physical => "physical",
            Method::Corrected => "corrected",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub crse: f64,
    pub cte: f64,
}

impl SequenceMetrics {
    pub fn of(errors: &[f64]) -> Result<Self> {
        Ok(SequenceMetrics { crse: crse(errors)?, cte: cte(errors)? })
    }
}

/// One outage evaluated with both methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub length: OutageLength,
    /// Run id and time of the sequence's last window.
    pub run: usize,
    pub t_end: f64,
    pub physical_errors: Vec<f64>,
    pub corrected_errors: Vec<f64>,
    pub physical: SequenceMetrics,
    pub corrected: SequenceMetrics,
    /// GNSS distance covered, meters.
    pub distance: f64,
}

impl SequenceResult {
    pub fn metrics(&self, method: Method) -> SequenceMetrics {
        match method {
            Method::Physical => self.physical,
            Method::Corrected => self.corrected,
        }
    }
}

/// Max, min, mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        let Some(&first) = values.first() else {
            return Err(Error::Empty("statistics of no values"));
        };
        let n = values.len() as f64;
        // Strict comparisons keep the first occurrence of a tie.
        let (mut max, mut min) = (first, first);
        for &v in &values[1..] {
            if v > max {
                max = v;
            }
            if v < min {
                min = v;
            }
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        // Rounding can push the mean a hair outside a constant sample.
        let mean = mean.clamp(min, max);
        Ok(Stats { max, min, mean, std: var.sqrt() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub crse: Stats,
    pub cte: Stats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub length: OutageLength,
    pub physical: MethodSummary,
    pub corrected: MethodSummary,
    pub n_sequences: usize,
    /// Per-sequence GNSS distance.
    pub distance: Stats,
    pub total_distance: f64,
}

impl MetricsSummary {
    pub fn method(&self, method: Method) -> &MethodSummary {
        match method {
            Method::Physical => &self.physical,
            Method::Corrected => &self.corrected,
        }
    }
}

pub fn aggregate(results: &[SequenceResult]) -> Result<MetricsSummary> {
    let Some(first) = results.first() else {
        return Err(Error::Empty("no sequence results to aggregate"));
    };
    let collect = |f: &dyn Fn(&SequenceResult) -> f64| results.iter().map(f).collect::<Vec<f64>>();
    let method = |m: Method| -> Result<MethodSummary> {
        Ok(MethodSummary {
            crse: Stats::of(&collect(&|r| r.metrics(m).crse))?,
            cte: Stats::of(&collect(&|r| r.metrics(m).cte))?,
        })
    };
    let distances = collect(&|r| r.distance);
    Ok(MetricsSummary {
        length: first.length,
        physical: method(Method::Physical)?,
        corrected: method(Method::Corrected)?,
        n_sequences: results.len(),
        distance: Stats::of(&distances)?,
        total_distance: distances.iter().sum(),
    })
}

/// Anything that predicts the per-second error of consecutive windows.
pub trait ErrorPredictor {
    /// One prediction per window, in order. Windows sharing a run id are
    /// consecutive seconds, so stateful predictors may carry state across them.
    fn predict_segment(&self, windows: &[LabeledWindow]) -> Result<Vec<f64>>;
}

impl ErrorPredictor for NetworkModel {
    fn predict_segment(&self, windows: &[LabeledWindow]) -> Result<Vec<f64>> {
        self.predict_windows(windows)
    }
}

/// Predicts zero error, so corrected equals physical.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullModel;

impl ErrorPredictor for NullModel {
    fn predict_segment(&self, windows: &[LabeledWindow]) -> Result<Vec<f64>> {
        Ok(vec![0.0; windows.len()])
    }
}

/// Predicts the true label, so corrected error vanishes.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleModel;

impl ErrorPredictor for OracleModel {
    fn predict_segment(&self, windows: &[LabeledWindow]) -> Result<Vec<f64>> {
        Ok(windows.iter().map(|w| w.label().0).collect())
    }
}

/// Per-sequence results and their summary for one outage length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub summary: MetricsSummary,
    pub sequences: Vec<SequenceResult>,
    /// Predicted error per sequence entry, aligned with `sequences`.
    #[serde(skip)]
    pub predictions: Vec<Vec<f64>>,
    #[serde(skip)]
    pub windows: Vec<Vec<LabeledWindow>>,
}

/// Evaluate already-built windows. Predictions run over every window in
/// order (the predictor keeps running between outages), then the windows are
/// cut into outage sequences of `length`.
pub fn evaluate_windows(
    predictor: &dyn ErrorPredictor,
    windows: &[LabeledWindow],
    length: OutageLength,
) -> Result<OutageReport> {
    let predictions = predictor.predict_segment(windows)?;
    if predictions.len() != windows.len() {
        return Err(Error::Shape { expected: windows.len(), got: predictions.len() });
    }
    evaluate_with_predictions(windows, &predictions, length)
}

/// Evaluate given one prediction per window.
pub fn evaluate_with_predictions(
    windows: &[LabeledWindow],
    predictions: &[f64],
    length: OutageLength,
) -> Result<OutageReport> {
    if predictions.len() != windows.len() {
        return Err(Error::Shape { expected: windows.len(), got: predictions.len() });
    }
    let seqs = split_outage_sequences(windows, length);
    if seqs.is_empty() {
        return Err(Error::NoSequences { length_s: length.seconds() });
    }
    let mut sequences = Vec::with_capacity(seqs.len());
    let mut preds = Vec::with_capacity(seqs.len());
    let mut wins = Vec::with_capacity(seqs.len());
    for seq in seqs {
        let p = &predictions[seq.start..seq.start + seq.entries.len()];
        let physical_errors: Vec<f64> = seq.entries.iter().map(|w| w.x_whr - w.x_gnss).collect();
        let corrected_errors: Vec<f64> =
            seq.entries.iter().zip(p).map(|(w, eps)| (w.x_whr - eps) - w.x_gnss).collect();
        let last = seq.entries.last().expect("sequences are non-empty");
        sequences.push(SequenceResult {
            length,
            run: last.run,
            t_end: last.t_end,
            physical: SequenceMetrics::of(&physical_errors)?,
            corrected: SequenceMetrics::of(&corrected_errors)?,
            physical_errors,
            corrected_errors,
            distance: seq.total_distance,
        });
        preds.push(p.to_vec());
        wins.push(seq.entries);
    }
    Ok(OutageReport { summary: aggregate(&sequences)?, sequences, predictions: preds, windows: wins })
}

/// Window a recording and evaluate it at one outage length.
pub fn run_outage_experiment(
    predictor: &dyn ErrorPredictor,
    recording: &Recording,
    cal: Calibration,
    opts: &WindowOptions,
    length: OutageLength,
) -> Result<OutageReport> {
    let windows = build_recording_windows(recording, cal, opts)?;
    evaluate_windows(predictor, &windows, length)
}

/// Percentage change from physical to corrected for each statistic.
/// `None` when the physical statistic is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReduction {
    pub max: Option<f64>,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReduction {
    pub crse: StatsReduction,
    pub cte: StatsReduction,
}

/// `100 (1 - |corrected| / |physical|)`. Magnitudes are compared so that a
/// signed CTE that flips sign is still scored by how far it is from zero.
pub fn reduction_percent(physical: f64, corrected: f64) -> Option<f64> {
    if physical == 0.0 || !physical.is_finite() || !corrected.is_finite() {
        return None;
    }
    Some(100.0 * (1.0 - corrected.abs() / physical.abs()))
}

pub fn error_reduction(physical: &MethodSummary, corrected: &MethodSummary) -> ErrorReduction {
    let stats = |p: &Stats, c: &Stats| StatsReduction {
        max: reduction_percent(p.max, c.max),
        min: reduction_percent(p.min, c.min),
        mean: reduction_percent(p.mean, c.mean),
        std: reduction_percent(p.std, c.std),
    };
    ErrorReduction { crse: stats(&physical.crse, &corrected.crse), cte: stats(&physical.cte, &corrected.cte) }
}
