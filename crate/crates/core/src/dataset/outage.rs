use std::fmt;

use serde::{Deserialize, Serialize};

use super::LabeledWindow;
use crate::error::{Error, Result};

/// Simulated GNSS outage durations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum OutageLength {
    S10,
    S30,
    S60,
    S120,
    S180,
}

impl OutageLength {
    pub const ALL: [OutageLength; 5] =
        [OutageLength::S10, OutageLength::S30, OutageLength::S60, OutageLength::S120, OutageLength::S180];

    pub fn seconds(self) -> usize {
        match self {
            OutageLength::S10 => 10,
            OutageLength::S30 => 30,
            OutageLength::S60 => 60,
            OutageLength::S120 => 120,
            OutageLength::S180 => 180,
        }
    }
}

impl TryFrom<usize> for OutageLength {
    type Error = Error;

    fn try_from(s: usize) -> Result<Self> {
        OutageLength::ALL
            .into_iter()
            .find(|l| l.seconds() == s)
            .ok_or_else(|| Error::InvalidInput(format!("outage length must be one of 10, 30, 60, 120, 180 s; got {s}")))
    }
}

impl From<OutageLength> for usize {
    fn from(l: OutageLength) -> usize {
        l.seconds()
    }
}

impl fmt::Display for OutageLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.seconds())
    }
}

/// Consecutive labeled seconds treated as one GNSS outage.
#[derive(Clone, Debug, PartialEq)]
pub struct OutageSequence {
    pub length: OutageLength,
    /// Index of the first entry in the window slice it was cut from.
    pub start: usize,
    pub entries: Vec<LabeledWindow>,
    /// Sum of the GNSS displacements, meters.
    pub total_distance: f64,
}

/// Cut each run of consecutive windows into as many non-overlapping
/// sequences of `length` seconds as fit, discarding the remainder.
pub fn split_outage_sequences(windows: &[LabeledWindow], length: OutageLength) -> Vec<OutageSequence> {
    let len = length.seconds();
    let mut out = Vec::new();
    let mut run_start = 0;
    while run_start < windows.len() {
        let run = windows[run_start].run;
        let run_end = run_start + windows[run_start..].iter().take_while(|w| w.run == run).count();
        let mut start = run_start;
        while start + len <= run_end {
            let entries = windows[start..start + len].to_vec();
            let total_distance = entries.iter().map(|w| w.x_gnss).sum();
            out.push(OutageSequence { length, start, entries, total_distance });
            start += len;
        }
        run_start = run_end;
    }
    out
}
