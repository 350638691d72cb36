//! Wheel-speed/GNSS recordings and everything derived from them: CSV
//! ingestion, one-second training windows, feature normalization, synthetic
//! drives and fixed-length outage sequences.

mod ingest;
mod normalize;
mod outage;
mod synth;
mod windows;

use serde::{Deserialize, Serialize};

use crate::deadreckon::{WheelSpeeds, SAMPLE_DT, TIMESTAMP_JITTER};
use crate::error::{Error, Result};
use crate::geodesy::GnssFix;

pub use ingest::{export_csv, ingest_csv, read_csv, write_csv, AngleUnit, ColumnMap, Schema, Units, WheelUnit};
pub use normalize::NormalizerParams;
pub use outage::{split_outage_sequences, OutageLength, OutageSequence};
pub use synth::{
    generate_synthetic, write_synthetic, Axle, RandomDrive, SlipEvent, SpeedSegment, SyntheticConfig, SyntheticOutput,
    WheelFactors, YawSegment,
};
pub use windows::{build_recording_windows, build_windows, LabeledWindow, TrainingWindow, WindowOptions, FEATURES};

/// Spacing above which consecutive samples belong to different segments, seconds.
pub const SEGMENT_GAP: f64 = SAMPLE_DT + TIMESTAMP_JITTER;

/// One 10 Hz sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WheelRecord {
    /// Seconds since the start of the recording.
    pub t: f64,
    pub wheels: WheelSpeeds,
    pub fix: GnssFix,
    /// Heading, radians clockwise from north.
    pub yaw: f64,
}

impl WheelRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || !self.yaw.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time or yaw at t = {}", self.t)));
        }
        self.wheels.validate()?;
        self.fix.validate()
    }
}

/// Time-sorted records split into gap-free segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Recording {
    records: Vec<WheelRecord>,
    /// Index of the first record of every segment after the first.
    breaks: Vec<usize>,
}

impl Recording {
    /// Sort records by timestamp and split them at gaps longer than
    /// [`SEGMENT_GAP`]. Input order does not matter.
    pub fn from_records(mut records: Vec<WheelRecord>) -> Result<Self> {
        for r in &records {
            r.validate()?;
        }
        records.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut breaks = Vec::new();
        for (i, pair) in records.windows(2).enumerate() {
            let dt = pair[1].t - pair[0].t;
            if dt > SEGMENT_GAP {
                breaks.push(i + 1);
            } else if dt < SAMPLE_DT - TIMESTAMP_JITTER {
                return Err(Error::DataIntegrity(format!(
                    "samples {:.3} s apart at t = {} (duplicate or off-grid timestamp)",
                    dt, pair[1].t
                )));
            }
        }
        Ok(Recording { records, breaks })
    }

    pub fn records(&self) -> &[WheelRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        if self.records.is_empty() {
            0
        } else {
            self.breaks.len() + 1
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = &[WheelRecord]> + '_ {
        let starts = std::iter::once(0).chain(self.breaks.iter().copied());
        let ends = self.breaks.iter().copied().chain(std::iter::once(self.records.len()));
        starts.zip(ends).filter(|(s, e)| e > s).map(move |(s, e)| &self.records[s..e])
    }

    pub fn into_records(self) -> Vec<WheelRecord> {
        self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> WheelRecord {
        WheelRecord { t, wheels: WheelSpeeds::uniform(1.0), fix: GnssFix::new(52.0, -1.0).unwrap(), yaw: 0.0 }
    }

    #[test]
    fn segments_split_on_gaps() {
        let mut recs: Vec<_> = (0..10).map(|i| rec(i as f64 / 10.0)).collect();
        recs.extend((0..10).map(|i| rec(3.0 + i as f64 / 10.0)));
        let r = Recording::from_records(recs).unwrap();
        assert_eq!(r.segment_count(), 2);
        assert_eq!(r.segments().map(|s| s.len()).collect::<Vec<_>>(), vec![10, 10]);
    }

    #[test]
    fn order_is_canonical() {
        let recs: Vec<_> = (0..30).map(|i| rec(i as f64 / 10.0)).collect();
        let mut shuffled = recs.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        assert_eq!(Recording::from_records(recs).unwrap(), Recording::from_records(shuffled).unwrap());
    }

    #[test]
    fn duplicates_are_rejected() {
        let recs = vec![rec(0.0), rec(0.1), rec(0.1)];
        assert!(matches!(Recording::from_records(recs), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn jitter_is_tolerated() {
        let recs = vec![rec(0.0), rec(0.115), rec(0.2), rec(0.31)];
        assert_eq!(Recording::from_records(recs).unwrap().segment_count(), 1);
        assert_eq!(Recording::from_records(vec![]).unwrap().segment_count(), 0);
    }
}
