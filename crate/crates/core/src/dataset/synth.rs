//! Synthetic drives with known odometry faults.
//!
//! The true trajectory is integrated at 100 Hz and sampled at 10 Hz. Each
//! wheel-speed sample is the mean wheel speed over the preceding 0.1 s, as an
//! encoder counting ticks would report it. GNSS fixes are the true positions,
//! forward-projected along the ellipsoid.
//!
//! Fault models:
//! - tyre bias `b` on a wheel scales its reported speed by `b`, so `b > 1`
//!   makes odometry overestimate distance;
//! - a slip event with ratio `s` makes the slipping wheels turn `1 / (1 - s)`
//!   times faster than the ground speed;
//! - zero-mean Gaussian noise on every wheel sample.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{write_csv, Schema, WheelRecord};
use crate::deadreckon::{WheelSpeeds, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::fingerprint::json_sha256;
use crate::geodesy::GnssFix;

const SUBSTEPS: usize = 10;
/// Below this ground speed the commanded yaw rate is scaled down linearly, m/s.
const TURN_SPEED: f64 = 2.0;

/// Linear ramp from the previous segment's end speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedSegment {
    pub duration_s: f64,
    pub end_speed_mps: f64,
}

/// Constant yaw rate, degrees per second clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YawSegment {
    pub duration_s: f64,
    pub yaw_rate_dps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlipEvent {
    pub start_s: f64,
    pub duration_s: f64,
    /// Fraction in [0, 1) by which ground speed falls short of wheel speed.
    pub slip_ratio: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axle {
    Front,
    #[default]
    Rear,
    Both,
}

impl Axle {
    fn mask(self) -> [bool; 4] {
        match self {
            Axle::Front => [true, true, false, false],
            Axle::Rear => [false, false, true, true],
            Axle::Both => [true; 4],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WheelFactors {
    pub fl: f64,
    pub fr: f64,
    pub rl: f64,
    pub rr: f64,
}

impl Default for WheelFactors {
    fn default() -> Self {
        WheelFactors { fl: 1.0, fr: 1.0, rl: 1.0, rr: 1.0 }
    }
}

impl WheelFactors {
    pub fn rear(bias: f64) -> Self {
        WheelFactors { rl: bias, rr: bias, ..WheelFactors::default() }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.fl, self.fr, self.rl, self.rr]
    }
}

/// Parameters for a randomly generated urban/suburban drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomDrive {
    pub max_speed_mps: f64,
    pub max_accel_mps2: f64,
    /// Chance that the next speed target is a stop.
    pub stop_probability: f64,
    pub max_yaw_rate_dps: f64,
    pub slip_events_per_minute: f64,
    pub max_slip_ratio: f64,
}

impl Default for RandomDrive {
    fn default() -> Self {
        RandomDrive {
            max_speed_mps: 30.0,
            max_accel_mps2: 2.5,
            stop_probability: 0.12,
            max_yaw_rate_dps: 8.0,
            slip_events_per_minute: 1.0,
            max_slip_ratio: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub duration_s: f64,
    pub seed: u64,
    pub origin: GnssFix,
    pub initial_yaw_deg: f64,
    pub initial_speed_mps: f64,
    /// Nominal rolling radius, also the calibration the odometry should use.
    pub wheel_radius_m: f64,
    pub track_width_m: f64,
    /// Speed holds at its last value once the profile is exhausted.
    pub speed_profile: Vec<SpeedSegment>,
    /// Yaw rate is zero once the profile is exhausted.
    pub yaw_profile: Vec<YawSegment>,
    pub tyre_bias: WheelFactors,
    pub slip_events: Vec<SlipEvent>,
    pub slip_axle: Axle,
    pub noise_std_rad_s: f64,
    /// When set, speed, yaw and slip profiles are drawn from `seed` and the
    /// explicit profiles must be empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomDrive>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            duration_s: 60.0,
            seed: 0,
            origin: GnssFix { lat: 52.4081, lon: -1.5106 },
            initial_yaw_deg: 0.0,
            initial_speed_mps: 0.0,
            wheel_radius_m: 0.3,
            track_width_m: 1.5,
            speed_profile: Vec::new(),
            yaw_profile: Vec::new(),
            tyre_bias: WheelFactors::default(),
            slip_events: Vec::new(),
            slip_axle: Axle::Rear,
            noise_std_rad_s: 0.0,
            random: None,
        }
    }
}

impl SyntheticConfig {
    /// A random drive of `duration_s` seconds, fault-free until configured otherwise.
    pub fn random_drive(duration_s: f64, seed: u64) -> Self {
        SyntheticConfig { duration_s, seed, random: Some(RandomDrive::default()), ..SyntheticConfig::default() }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SyntheticConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        self.origin.validate()?;
        if !(self.wheel_radius_m > 0.0) || !(self.track_width_m >= 0.0) {
            return bad("wheel_radius_m must be positive and track_width_m non-negative".into());
        }
        if !(self.initial_speed_mps >= 0.0) || !self.initial_yaw_deg.is_finite() {
            return bad("initial speed must be non-negative and initial yaw finite".into());
        }
        for (i, s) in self.speed_profile.iter().enumerate() {
            if !(s.duration_s > 0.0) || !(s.end_speed_mps >= 0.0) || !s.end_speed_mps.is_finite() {
                return bad(format!("speed segment {i}: need positive duration and non-negative speed"));
            }
        }
        for (i, s) in self.yaw_profile.iter().enumerate() {
            if !(s.duration_s > 0.0) || !s.yaw_rate_dps.is_finite() {
                return bad(format!("yaw segment {i}: need positive duration and finite rate"));
            }
        }
        for (i, e) in self.slip_events.iter().enumerate() {
            if !(e.duration_s > 0.0) || !e.start_s.is_finite() || !(0.0..1.0).contains(&e.slip_ratio) {
                return bad(format!("slip event {i}: need positive duration and ratio in [0, 1)"));
            }
        }
        if self.tyre_bias.as_array().iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return bad("tyre bias factors must be positive".into());
        }
        if !(self.noise_std_rad_s >= 0.0 && self.noise_std_rad_s.is_finite()) {
            return bad("noise_std_rad_s must be non-negative".into());
        }
        if let Some(r) = &self.random {
            if !self.speed_profile.is_empty() || !self.yaw_profile.is_empty() || !self.slip_events.is_empty() {
                return bad("explicit profiles cannot be combined with `random`".into());
            }
            if !(r.max_speed_mps > 3.0 && r.max_accel_mps2 > 0.0 && (0.0..=1.0).contains(&r.stop_probability)) {
                return bad("random drive needs max_speed_mps > 3, max_accel_mps2 > 0, stop_probability in [0, 1]".into());
            }
            if !(r.max_yaw_rate_dps >= 0.0 && r.slip_events_per_minute >= 0.0 && (0.0..1.0).contains(&r.max_slip_ratio)) {
                return bad("random drive needs non-negative yaw/slip rates and max_slip_ratio in [0, 1)".into());
            }
        }
        Ok(())
    }

    /// The explicit profiles, or the ones drawn from `random`.
    pub fn resolved(&self) -> Result<SyntheticConfig> {
        self.validate()?;
        let Some(params) = &self.random else {
            return Ok(self.clone());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let mut cfg = self.clone();
        cfg.random = None;

        let mut t = 0.0;
        let mut v = self.initial_speed_mps;
        while t < self.duration_s {
            let target = if rng.random_bool(params.stop_probability) { 0.0 } else { rng.random_range(3.0..params.max_speed_mps) };
            let ramp = ((target - v).abs() / params.max_accel_mps2).max(1.0);
            let hold = if target == 0.0 { rng.random_range(3.0..10.0) } else { rng.random_range(5.0..40.0) };
            cfg.speed_profile.push(SpeedSegment { duration_s: ramp, end_speed_mps: target });
            cfg.speed_profile.push(SpeedSegment { duration_s: hold, end_speed_mps: target });
            t += ramp + hold;
            v = target;
        }

        t = 0.0;
        while t < self.duration_s {
            let seg = if params.max_yaw_rate_dps == 0.0 || rng.random_bool(0.5) {
                YawSegment { duration_s: rng.random_range(5.0..30.0), yaw_rate_dps: 0.0 }
            } else {
                let rate = rng.random_range(-params.max_yaw_rate_dps..=params.max_yaw_rate_dps);
                YawSegment { duration_s: rng.random_range(2.0..10.0), yaw_rate_dps: rate }
            };
            t += seg.duration_s;
            cfg.yaw_profile.push(seg);
        }

        let n_slips = (self.duration_s / 60.0 * params.slip_events_per_minute).round() as usize;
        if params.max_slip_ratio > 0.0 {
            for _ in 0..n_slips {
                cfg.slip_events.push(SlipEvent {
                    start_s: rng.random_range(0.0..self.duration_s),
                    duration_s: rng.random_range(0.5..3.0),
                    slip_ratio: rng.random_range(0.0..params.max_slip_ratio),
                });
            }
            cfg.slip_events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        }
        Ok(cfg)
    }
}

struct Profile<'a> {
    cfg: &'a SyntheticConfig,
    /// (start time, start speed) of each speed segment.
    speed_starts: Vec<(f64, f64)>,
    yaw_starts: Vec<f64>,
}

impl<'a> Profile<'a> {
    fn new(cfg: &'a SyntheticConfig) -> Self {
        let mut speed_starts = Vec::with_capacity(cfg.speed_profile.len());
        let (mut t, mut v) = (0.0, cfg.initial_speed_mps);
        for s in &cfg.speed_profile {
            speed_starts.push((t, v));
            t += s.duration_s;
            v = s.end_speed_mps;
        }
        let mut yaw_starts = Vec::with_capacity(cfg.yaw_profile.len());
        t = 0.0;
        for s in &cfg.yaw_profile {
            yaw_starts.push(t);
            t += s.duration_s;
        }
        Profile { cfg, speed_starts, yaw_starts }
    }

    fn speed(&self, t: f64) -> f64 {
        let k = self.speed_starts.partition_point(|(t0, _)| *t0 <= t);
        if k == 0 {
            return self.cfg.initial_speed_mps;
        }
        let (t0, v0) = self.speed_starts[k - 1];
        let seg = &self.cfg.speed_profile[k - 1];
        let frac = ((t - t0) / seg.duration_s).min(1.0);
        v0 + (seg.end_speed_mps - v0) * frac
    }

    fn yaw_rate(&self, t: f64) -> f64 {
        let k = self.yaw_starts.partition_point(|t0| *t0 <= t);
        if k == 0 {
            return 0.0;
        }
        let seg = &self.cfg.yaw_profile[k - 1];
        if t - self.yaw_starts[k - 1] < seg.duration_s {
            seg.yaw_rate_dps.to_radians()
        } else {
            0.0
        }
    }

    fn slip(&self, t: f64) -> f64 {
        self.cfg
            .slip_events
            .iter()
            .filter(|e| t >= e.start_s && t < e.start_s + e.duration_s)
            .map(|e| e.slip_ratio)
            .fold(0.0, f64::max)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// Simulate `cfg.duration_s` seconds of driving at 10 Hz.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<WheelRecord>> {
    let cfg = cfg.resolved()?;
    let profile = Profile::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = if cfg.noise_std_rad_s > 0.0 {
        Some(Normal::new(0.0, cfg.noise_std_rad_s).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let n_samples = (cfg.duration_s * SAMPLE_RATE_HZ as f64).round() as usize;
    let tick = 1.0 / SAMPLE_RATE_HZ as f64;
    let dt = tick / SUBSTEPS as f64;
    let half_track = cfg.track_width_m / 2.0;
    let bias = cfg.tyre_bias.as_array();
    let slip_mask = cfg.slip_axle.mask();

    let mut fix = cfg.origin;
    let mut yaw = cfg.initial_yaw_deg.to_radians();
    let mut out = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / SAMPLE_RATE_HZ as f64;
        // Distance rolled by each wheel over the preceding tick: [fl, fr, rl, rr].
        let mut rolled = [0.0f64; 4];
        if i == 0 {
            rolled = [profile.speed(0.0) * tick; 4];
        } else {
            let t_prev = (i - 1) as f64 / SAMPLE_RATE_HZ as f64;
            for k in 0..SUBSTEPS {
                let tm = t_prev + (k as f64 + 0.5) * dt;
                let v = profile.speed(tm);
                let rate = profile.yaw_rate(tm) * (v / TURN_SPEED).min(1.0);
                let heading = yaw + rate * dt / 2.0;
                let step = v * dt;
                if step > 0.0 {
                    fix = fix.project(heading.to_degrees(), step);
                }
                yaw += rate * dt;
                // Positive (clockwise) yaw rate is a right turn: left wheels on the outside.
                let left = (v + rate * half_track) * dt;
                let right = (v - rate * half_track) * dt;
                rolled[0] += left;
                rolled[1] += right;
                rolled[2] += left;
                rolled[3] += right;
            }
        }
        let slip = profile.slip(t - tick / 2.0);
        let mut omega = [0.0f64; 4];
        for w in 0..4 {
            let slip_factor = if slip_mask[w] { 1.0 / (1.0 - slip) } else { 1.0 };
            omega[w] = bias[w] * rolled[w] / tick / cfg.wheel_radius_m * slip_factor;
            if let Some(n) = &noise {
                omega[w] += n.sample(&mut rng);
            }
        }
        out.push(WheelRecord {
            t,
            wheels: WheelSpeeds::new(omega[0], omega[1], omega[2], omega[3]),
            fix,
            yaw: wrap_angle(yaw),
        });
    }
    Ok(out)
}

/// Sidecar written next to a synthetic CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub generator: String,
    pub seed: u64,
    pub config_sha256: String,
    pub records: usize,
    pub csv_sha256: String,
    pub config: SyntheticConfig,
}

#[derive(Clone, Debug)]
pub struct SyntheticOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: SyntheticManifest,
}

/// Generate and write `<dir>/<stem>.csv` plus `<dir>/<stem>.manifest.json`.
pub fn write_synthetic(cfg: &SyntheticConfig, dir: impl AsRef<Path>, stem: &str) -> Result<SyntheticOutput> {
    let records = generate_synthetic(cfg)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut buf = Vec::new();
    write_csv(&mut buf, &records, &Schema::default())?;
    std::fs::write(&csv_path, &buf)?;

    let manifest = SyntheticManifest {
        generator: format!("whonet {}", env!("CARGO_PKG_VERSION")),
        seed: cfg.seed,
        config_sha256: json_sha256(cfg)?,
        records: records.len(),
        csv_sha256: crate::fingerprint::sha256_hex(&buf),
        config: cfg.clone(),
    };
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest_path)?), &manifest)?;
    Ok(SyntheticOutput { csv_path, manifest_path, manifest })
}
