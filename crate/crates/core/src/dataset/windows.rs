use log::warn;

use super::{Recording, WheelRecord};
use crate::deadreckon::{integrate_displacement, Calibration, WheelSpeeds, DEFAULT_MAX_SPEED, SAMPLES_PER_WINDOW};
use crate::error::{Error, Result};
use crate::geodesy::{gnss_displacement, label_error, ErrorLabel, GnssFix};

/// Network input width: four wheels times ten samples.
pub const FEATURES: usize = 4 * SAMPLES_PER_WINDOW;

/// One second of wheel speeds, wheel-major: `[fl0..fl9, fr0..fr9, rl0..rl9, rr0..rr9]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingWindow {
    pub x: [f64; FEATURES],
    pub y: ErrorLabel,
}

impl TrainingWindow {
    pub fn from_samples(samples: &[WheelSpeeds], y: ErrorLabel) -> Result<Self> {
        if samples.len() != SAMPLES_PER_WINDOW {
            return Err(Error::WindowSize { expected: SAMPLES_PER_WINDOW, got: samples.len() });
        }
        let mut x = [0.0; FEATURES];
        for (k, s) in samples.iter().enumerate() {
            let [fl, fr, rl, rr] = s.as_array();
            x[k] = fl;
            x[SAMPLES_PER_WINDOW + k] = fr;
            x[2 * SAMPLES_PER_WINDOW + k] = rl;
            x[3 * SAMPLES_PER_WINDOW + k] = rr;
        }
        Ok(TrainingWindow { x, y })
    }

    /// Inverse of [`TrainingWindow::from_samples`].
    pub fn samples(&self) -> [WheelSpeeds; SAMPLES_PER_WINDOW] {
        let n = SAMPLES_PER_WINDOW;
        std::array::from_fn(|k| WheelSpeeds::new(self.x[k], self.x[n + k], self.x[2 * n + k], self.x[3 * n + k]))
    }
}

/// A training window together with what is needed to evaluate it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledWindow {
    pub window: TrainingWindow,
    /// Odometry displacement over the second, meters.
    pub x_whr: f64,
    /// GNSS displacement over the second, meters.
    pub x_gnss: f64,
    /// Yaw of the window's last sample, radians.
    pub yaw: f64,
    pub fix_start: GnssFix,
    pub fix_end: GnssFix,
    /// Timestamp of the window's last sample.
    pub t_end: f64,
    /// Windows with equal `run` are consecutive seconds of one segment.
    pub run: usize,
}

impl LabeledWindow {
    pub fn label(&self) -> ErrorLabel {
        self.window.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowOptions {
    /// Windows implying a faster speed are dropped, m/s.
    pub max_speed: f64,
    /// Samples between consecutive window starts. Equal to the window length
    /// (no overlap) unless set otherwise.
    pub stride: usize,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions { max_speed: DEFAULT_MAX_SPEED, stride: SAMPLES_PER_WINDOW }
    }
}

/// Cut one gap-free segment into labeled one-second windows.
///
/// The first second only supplies the GNSS fix preceding the first window,
/// so a segment of `n` records yields `n / 10 - 1` windows at the default
/// stride. Windows above the speed bound are dropped with a warning and
/// split the output into separate runs.
pub fn build_windows(segment: &[WheelRecord], cal: Calibration, opts: &WindowOptions) -> Result<Vec<LabeledWindow>> {
    let n = SAMPLES_PER_WINDOW;
    if opts.stride == 0 {
        return Err(Error::Config("window stride must be at least one sample".into()));
    }
    if segment.len() < 2 * n {
        if !segment.is_empty() {
            warn!("segment of {} records is too short for a window (need {})", segment.len(), 2 * n);
        }
        return Ok(Vec::new());
    }

    let mut out = Vec::with_capacity(segment.len() / opts.stride);
    let mut run = 0;
    let mut samples = [WheelSpeeds::default(); SAMPLES_PER_WINDOW];
    let mut start = n;
    while start + n <= segment.len() {
        let recs = &segment[start..start + n];
        for (slot, r) in samples.iter_mut().zip(recs) {
            *slot = r.wheels;
        }
        let prior = &segment[start - 1];
        let last = &recs[n - 1];
        let x_whr = integrate_displacement(&samples, cal)?.meters();
        let x_gnss = gnss_displacement(&prior.fix, &last.fix)?;
        if !(x_whr.abs() <= opts.max_speed && x_gnss <= opts.max_speed) {
            warn!(
                "dropping window ending t = {}: displacement {x_whr:.2} m (odometry) / {x_gnss:.2} m (GNSS) exceeds {} m/s",
                last.t, opts.max_speed
            );
            if out.last().is_some_and(|w: &LabeledWindow| w.run == run) {
                run += 1;
            }
        } else {
            out.push(LabeledWindow {
                window: TrainingWindow::from_samples(&samples, label_error(x_whr, x_gnss))?,
                x_whr,
                x_gnss,
                yaw: last.yaw,
                fix_start: prior.fix,
                fix_end: last.fix,
                t_end: last.t,
                run,
            });
        }
        start += opts.stride;
    }
    Ok(out)
}

/// Windows of every segment, with run ids unique across the recording.
pub fn build_recording_windows(
    recording: &Recording,
    cal: Calibration,
    opts: &WindowOptions,
) -> Result<Vec<LabeledWindow>> {
    let mut out: Vec<LabeledWindow> = Vec::new();
    for segment in recording.segments() {
        let offset = out.last().map_or(0, |w| w.run + 1);
        out.extend(build_windows(segment, cal, opts)?.into_iter().map(|mut w| {
            w.run += offset;
            w
        }));
    }
    Ok(out)
}
