//! Physical wheel-odometry model.
//!
//! Wheel speeds are averaged over the rear axle, scaled by the calibration
//! radius into a body-frame velocity, integrated over one-second windows and
//! rotated into a local north/east frame by the vehicle yaw. Pitch and roll are
//! ignored, so the down component is identically zero.

use serde::{Deserialize, Serialize};

use crate::dataset::WheelRecord;
use crate::error::{Error, Result};

/// Wheel-speed sampling rate of the supported datasets.
pub const SAMPLE_RATE_HZ: usize = 10;
/// Samples per one-second labeling window.
pub const SAMPLES_PER_WINDOW: usize = SAMPLE_RATE_HZ;
/// Nominal sample spacing, seconds.
pub const SAMPLE_DT: f64 = 1.0 / SAMPLE_RATE_HZ as f64;
/// Allowed deviation of a sample spacing from [`SAMPLE_DT`].
pub const TIMESTAMP_JITTER: f64 = 0.02;
/// Speeds above this are treated as corrupt data, m/s.
pub const DEFAULT_MAX_SPEED: f64 = 70.0;

/// Angular velocities of the four wheels, rad/s. Negative values mean reverse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub fl: f64,
    pub fr: f64,
    pub rl: f64,
    pub rr: f64,
}

impl WheelSpeeds {
    pub fn new(fl: f64, fr: f64, rl: f64, rr: f64) -> Self {
        WheelSpeeds { fl, fr, rl, rr }
    }

    /// Same speed on every wheel.
    pub fn uniform(omega: f64) -> Self {
        WheelSpeeds::new(omega, omega, omega, omega)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.fl, self.fr, self.rl, self.rr]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("non-finite wheel speed in {self:?}")))
        }
    }
}

/// Distance travelled along the body x-axis over one window, meters.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BodyDisplacement(pub f64);

impl BodyDisplacement {
    pub fn meters(self) -> f64 {
        self.0
    }

    /// Whether the displacement implies a speed above `max_speed` over a 1 s window.
    pub fn exceeds(self, max_speed: f64) -> bool {
        !(self.0.abs() <= max_speed)
    }
}

/// Horizontal position in a local north-east-down frame, meters.
///
/// Navigation is planar, so there is no stored down component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NedPosition {
    pub north: f64,
    pub east: f64,
}

impl NedPosition {
    pub const ORIGIN: NedPosition = NedPosition { north: 0.0, east: 0.0 };

    pub fn new(north: f64, east: f64) -> Self {
        NedPosition { north, east }
    }

    pub fn down(&self) -> f64 {
        0.0
    }

    pub fn distance_to(&self, other: &NedPosition) -> f64 {
        (self.north - other.north).hypot(self.east - other.east)
    }
}

/// Constant mapping rear-axle wheel speed (rad/s) to vehicle speed (m/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Calibration {
    radius: f64,
}

impl Calibration {
    /// Effective rolling radius of a typical passenger-car tyre.
    pub const DEFAULT_RADIUS: f64 = 0.3;

    pub fn new(radius: f64) -> Result<Self> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Calibration { radius })
        } else {
            Err(Error::Calibration(radius))
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { radius: Self::DEFAULT_RADIUS }
    }
}

impl TryFrom<f64> for Calibration {
    type Error = Error;

    fn try_from(radius: f64) -> Result<Self> {
        Calibration::new(radius)
    }
}

impl From<Calibration> for f64 {
    fn from(cal: Calibration) -> f64 {
        cal.radius
    }
}

/// Body-to-navigation rotation about the vertical axis.
pub fn rotation_nb(yaw: f64) -> Result<[[f64; 3]; 3]> {
    if !yaw.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite yaw {yaw}")));
    }
    let (s, c) = yaw.sin_cos();
    Ok([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

pub fn rear_axle_speed(ws: &WheelSpeeds) -> f64 {
    (ws.rr + ws.rl) / 2.0
}

pub fn linear_velocity(omega_rear: f64, cal: Calibration) -> f64 {
    omega_rear * cal.radius()
}

/// Rectangle-rule integral of the rear-axle velocity over one window of
/// [`SAMPLES_PER_WINDOW`] samples. Front wheels do not enter the physical model.
pub fn integrate_displacement(samples: &[WheelSpeeds], cal: Calibration) -> Result<BodyDisplacement> {
    if samples.len() != SAMPLES_PER_WINDOW {
        return Err(Error::WindowSize { expected: SAMPLES_PER_WINDOW, got: samples.len() });
    }
    let mut omega_sum = 0.0;
    for ws in samples {
        ws.validate()?;
        omega_sum += rear_axle_speed(ws);
    }
    // Dividing by the rate rather than multiplying by 0.1 keeps constant
    // integrands exact for representable speeds.
    Ok(BodyDisplacement(linear_velocity(omega_sum, cal) / SAMPLE_RATE_HZ as f64))
}

/// Advance `pos` by `disp` along heading `yaw` (radians clockwise from north).
pub fn update_position(pos: NedPosition, disp: BodyDisplacement, yaw: f64) -> Result<NedPosition> {
    if !(pos.north.is_finite() && pos.east.is_finite() && disp.0.is_finite()) {
        return Err(Error::InvalidInput("non-finite position or displacement".into()));
    }
    let rot = rotation_nb(yaw)?;
    // Body displacement is [d, 0, 0]; only the first column contributes.
    Ok(NedPosition {
        north: pos.north + rot[0][0] * disp.0,
        east: pos.east + rot[1][0] * disp.0,
    })
}

/// Check that `records` lie on a gap-free, increasing 10 Hz grid.
pub fn check_contiguous(records: &[WheelRecord]) -> Result<()> {
    for pair in records.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if !(dt > 0.0) {
            return Err(Error::DataIntegrity(format!(
                "timestamps not increasing at t = {}",
                pair[1].t
            )));
        }
        if (dt - SAMPLE_DT).abs() > TIMESTAMP_JITTER {
            return Err(Error::DataIntegrity(format!(
                "sample spacing {dt:.3} s at t = {} is off the 10 Hz grid",
                pair[1].t
            )));
        }
    }
    Ok(())
}

/// Dead-reckon a contiguous record stream one second at a time.
///
/// Returns `start` followed by one position per complete second. Each second
/// is rotated by the yaw of its last sample.
pub fn dead_reckon(records: &[WheelRecord], cal: Calibration, start: NedPosition) -> Result<Vec<NedPosition>> {
    if records.len() % SAMPLES_PER_WINDOW != 0 {
        return Err(Error::WindowSize { expected: SAMPLES_PER_WINDOW, got: records.len() % SAMPLES_PER_WINDOW });
    }
    check_contiguous(records)?;

    let mut track = Vec::with_capacity(records.len() / SAMPLES_PER_WINDOW + 1);
    track.push(start);
    let mut pos = start;
    let mut speeds = [WheelSpeeds::default(); SAMPLES_PER_WINDOW];
    for window in records.chunks_exact(SAMPLES_PER_WINDOW) {
        for (slot, rec) in speeds.iter_mut().zip(window) {
            *slot = rec.wheels;
        }
        let disp = integrate_displacement(&speeds, cal)?;
        pos = update_position(pos, disp, window[SAMPLES_PER_WINDOW - 1].yaw)?;
        track.push(pos);
    }
    Ok(track)
}
