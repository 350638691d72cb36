use serde::{Deserialize, Serialize};

use super::{TrainingWindow, FEATURES};
use crate::error::{Error, Result};

/// Per-feature min-max scaling fitted on training windows.
///
/// Fitted minima map to 0 and maxima to 1. Inputs outside the fitted range
/// are not clipped. Constant features map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizerParams {
    pub fn fit<'a>(windows: impl IntoIterator<Item = &'a TrainingWindow>) -> Result<Self> {
        let mut min = vec![f64::INFINITY; FEATURES];
        let mut max = vec![f64::NEG_INFINITY; FEATURES];
        let mut count = 0usize;
        for w in windows {
            count += 1;
            for (k, &v) in w.x.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        if count == 0 {
            return Err(Error::Empty("no windows to fit the normalizer on"));
        }
        Ok(NormalizerParams { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::Shape { expected: self.min.len(), got: self.max.len() });
        }
        if self.min.iter().zip(&self.max).any(|(lo, hi)| !(hi >= lo) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidInput("normalizer needs finite max >= min for every feature".into()));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: x.len() });
        }
        for k in 0..self.dim() {
            let span = self.max[k] - self.min[k];
            out[k] = if span > 0.0 { (x[k] - self.min[k]) / span } else { 0.0 };
        }
        Ok(())
    }

    /// Map scaled values back to raw units. Constant features return their fitted value.
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: z.len() });
        }
        Ok((0..self.dim())
            .map(|k| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    self.min[k] + z[k] * span
                } else {
                    self.min[k]
                }
            })
            .collect())
    }
}
